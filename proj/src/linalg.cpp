#include "pdkf/linalg.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace pdkf::linalg {

double asymmetry(const Mat& m) {
    const double scale = std::max(m.norm(), 1e-300);
    return (m - m.transpose()).norm() / scale;
}

bool is_zero(const Mat& m) { return m.size() == 0 || m.cwiseAbs().maxCoeff() == 0.0; }

Eigen::Index rank(const Mat& m, double rel_tol) {
    if (m.size() == 0) {
        return 0;
    }
    Eigen::JacobiSVD<Mat> svd(m);
    const Vec& s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0) {
        return 0;
    }
    const double cutoff = rel_tol * s(0);
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) > cutoff) {
            ++r;
        }
    }
    return r;
}

bool has_full_row_rank(const Mat& m, double rel_tol) { return rank(m, rel_tol) == m.rows(); }

Mat pseudo_inverse(const Mat& m, double rel_tol) {
    if (m.size() == 0) {
        return Mat::Zero(m.cols(), m.rows());
    }
    Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec& s = svd.singularValues();
    Vec inv_s = Vec::Zero(s.size());
    if (s.size() > 0 && s(0) > 0.0) {
        const double cutoff = rel_tol * s(0);
        for (Eigen::Index i = 0; i < s.size(); ++i) {
            if (s(i) > cutoff) {
                inv_s(i) = 1.0 / s(i);
            }
        }
    }
    return svd.matrixV() * inv_s.asDiagonal() * svd.matrixU().transpose();
}

bool is_positive_definite(const Mat& m) {
    if (m.rows() != m.cols() || m.rows() == 0) {
        return false;
    }
    Eigen::LLT<Mat> llt(symmetrize(m));
    return llt.info() == Eigen::Success;
}

Mat spd_inverse(const Mat& m, const char* what) {
    Eigen::LLT<Mat> llt(symmetrize(m));
    if (llt.info() != Eigen::Success) {
        std::ostringstream os;
        os << what << " is not positive definite (condition number " << condition_number(m) << ")";
        throw NumericalError(os.str());
    }
    return symmetrize(llt.solve(Mat::Identity(m.rows(), m.cols())));
}

Mat ensure_spd(const Mat& m, const char* what) {
    Mat s = symmetrize(m);
    if (is_positive_definite(s)) {
        return s;
    }
    s.diagonal().array() += kJitter;
    if (!is_positive_definite(s)) {
        std::ostringstream os;
        os << what << " lost positive definiteness (lambda_min " << lambda_min(m) << ")";
        throw NumericalError(os.str());
    }
    return s;
}

Vec symmetric_eigenvalues(const Mat& m) {
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

double lambda_max(const Mat& m) { return symmetric_eigenvalues(m).maxCoeff(); }

double lambda_min(const Mat& m) { return symmetric_eigenvalues(m).minCoeff(); }

double condition_number(const Mat& m) {
    if (m.size() == 0) {
        return 0.0;
    }
    Eigen::JacobiSVD<Mat> svd(m);
    const Vec& s = svd.singularValues();
    const double smin = s(s.size() - 1);
    if (smin == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return s(0) / smin;
}

Mat matrix_power(const Mat& a, int p) {
    Mat base = p < 0 ? Mat(a.inverse()) : a;
    int e = p < 0 ? -p : p;
    Mat result = Mat::Identity(a.rows(), a.cols());
    while (e > 0) {
        if (e & 1) {
            result = result * base;
        }
        base = base * base;
        e >>= 1;
    }
    return result;
}

Mat spd_inverse_sqrt(const Mat& m) {
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(m));
    const Vec& w = es.eigenvalues();
    if (w.minCoeff() <= 0.0) {
        throw NumericalError("inverse square root of a matrix that is not positive definite");
    }
    return es.eigenvectors() * w.cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace pdkf::linalg
