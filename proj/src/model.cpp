#include "pdkf/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pdkf {

namespace {

std::string dims(const Mat& m) {
    std::ostringstream os;
    os << m.rows() << "x" << m.cols();
    return os.str();
}

void check_square(const Mat& m, int n, const char* what) {
    if (m.rows() != n || m.cols() != n) {
        throw ValidationError(std::string(what) + " must be " + std::to_string(n) + "x" + std::to_string(n) +
                              ", got " + dims(m));
    }
}

void check_symmetric_psd(const Mat& m, const char* what) {
    if (linalg::asymmetry(m) > 1e-10) {
        throw ValidationError(std::string(what) + " is not symmetric");
    }
    if (m.size() > 0 && linalg::lambda_min(m) < -1e-10 * std::max(1.0, m.norm())) {
        throw ValidationError(std::string(what) + " is not positive semidefinite");
    }
}

// reachability over the "j sends to i" relation (a_ij > 0)
std::vector<bool> reachable_from(const Mat& w, int src) {
    const int N = static_cast<int>(w.rows());
    std::vector<bool> seen(N, false);
    std::vector<int> stack{src};
    seen[src] = true;
    while (!stack.empty()) {
        const int j = stack.back();
        stack.pop_back();
        for (int i = 0; i < N; ++i) {
            if (!seen[i] && w(i, j) > 0.0) {
                seen[i] = true;
                stack.push_back(i);
            }
        }
    }
    return seen;
}

}  // namespace

const Mat& SystemModel::A_at(int k) const {
    if (A.empty()) {
        throw ValidationError("system matrix sequence is empty");
    }
    return A[std::min<std::size_t>(static_cast<std::size_t>(std::max(k, 0)), A.size() - 1)];
}

const Mat& SystemModel::Q_at(int k) const {
    if (Q.empty()) {
        throw ValidationError("process noise sequence is empty");
    }
    return Q[std::min<std::size_t>(static_cast<std::size_t>(std::max(k, 0)), Q.size() - 1)];
}

void SystemModel::validate() const {
    if (n <= 0) {
        throw ValidationError("state dimension n must be positive");
    }
    if (A.empty() || Q.empty()) {
        throw ValidationError("A and Q must each have at least one entry");
    }
    if (!(beta1 > 0.0) || !(beta2 > 0.0) || beta2 > beta1) {
        throw ValidationError("beta1 and beta2 must be declared with 0 < beta2 <= beta1");
    }
    for (std::size_t k = 0; k < A.size(); ++k) {
        check_square(A[k], n, "A");
        Eigen::JacobiSVD<Mat> svd(A[k]);
        const Vec& s = svd.singularValues();
        const double hi = s(0) * s(0);
        const double lo = s(n - 1) * s(n - 1);
        if (lo <= 0.0) {
            throw ValidationError("A[" + std::to_string(k) + "] is singular");
        }
        if (hi > beta1 * (1.0 + 1e-12) || lo < beta2 * (1.0 - 1e-12)) {
            std::ostringstream os;
            os << "A[" << k << "] violates beta2 I <= A A^T <= beta1 I: singular values squared in [" << lo
               << ", " << hi << "], declared [" << beta2 << ", " << beta1 << "]";
            throw ValidationError(os.str());
        }
    }
    for (const Mat& q : Q) {
        check_square(q, n, "Q");
        check_symmetric_psd(q, "Q");
        if (Q_lo.size() > 0 && linalg::lambda_min(q - Q_lo) < -1e-10) {
            throw ValidationError("Q violates the declared lower bound Q_lo");
        }
        if (Q_hi.size() > 0 && linalg::lambda_min(Q_hi - q) < -1e-10) {
            throw ValidationError("Q violates the declared upper bound Q_hi");
        }
    }
    if (Q_lo.size() > 0 && !linalg::is_positive_definite(Q_lo)) {
        throw ValidationError("Q_lo must be positive definite");
    }
    if (Q_hi.size() > 0 && !linalg::is_positive_definite(Q_hi)) {
        throw ValidationError("Q_hi must be positive definite");
    }
    if (x0_mean.size() != n) {
        throw ValidationError("x0_mean must have n entries");
    }
    check_square(x0_cov, n, "x0_cov");
    check_symmetric_psd(x0_cov, "x0_cov");
    check_square(P0, n, "P0");
    check_symmetric_psd(P0, "P0");
}

Mat AgentSpec::information() const {
    const auto n = H.cols();
    if (!has_measurement()) {
        return Mat::Zero(n, n);
    }
    return linalg::symmetrize(H.transpose() * linalg::spd_inverse(R, "R") * H);
}

Mat AgentSpec::constraint_information() const {
    const auto n = D.cols();
    if (!has_constraint()) {
        return Mat::Zero(n, n);
    }
    return D.transpose() * D / epsilon;
}

void AgentSpec::validate(int n) const {
    if (H.cols() != n) {
        throw ValidationError("H must have n columns, got " + dims(H));
    }
    if (R.rows() != H.rows() || R.cols() != H.rows()) {
        throw ValidationError("R must be m x m with m = rows(H), got " + dims(R));
    }
    if (!linalg::is_positive_definite(R) || linalg::asymmetry(R) > 1e-10) {
        throw ValidationError("R must be symmetric positive definite");
    }
    if (D.cols() != n) {
        throw ValidationError("D must have n columns, got " + dims(D));
    }
    if (d.size() != D.rows()) {
        throw ValidationError("d must have rows(D) entries");
    }
    if (has_constraint() && !linalg::has_full_row_rank(D)) {
        throw ValidationError("D must be zero or full row rank (rank " + std::to_string(linalg::rank(D)) +
                              " < " + std::to_string(D.rows()) + ")");
    }
    if (!(epsilon > 0.0)) {
        throw ValidationError("epsilon must be positive");
    }
    if (!(delta >= 0.0)) {
        throw ValidationError("delta must be nonnegative");
    }
    if (!(theta > 0.0)) {
        throw ValidationError("theta must be positive");
    }
    if (x0.size() != 0 && x0.size() != n) {
        throw ValidationError("agent x0 must have n entries");
    }
    if (P0.size() != 0) {
        check_square(P0, n, "agent P0");
        if (!linalg::is_positive_definite(P0)) {
            throw ValidationError("agent P0 must be positive definite");
        }
    }
}

bool is_strongly_connected(const Mat& weights) {
    const int N = static_cast<int>(weights.rows());
    if (N == 0) {
        return false;
    }
    // strongly connected iff 0 reaches all and all reach 0
    const auto fwd = reachable_from(weights, 0);
    const auto bwd = reachable_from(weights.transpose(), 0);
    return std::all_of(fwd.begin(), fwd.end(), [](bool b) { return b; }) &&
           std::all_of(bwd.begin(), bwd.end(), [](bool b) { return b; });
}

Topology Topology::from_weights(const Mat& w) {
    Topology t;
    t.N = static_cast<int>(w.rows());
    t.weights = w;
    t.in_neighbors.assign(t.N, {});
    t.out_degree.assign(t.N, 0);
    for (int i = 0; i < t.N; ++i) {
        for (int j = 0; j < w.cols(); ++j) {
            if (i != j && w(i, j) > 0.0) {
                t.in_neighbors[i].push_back(j);
                t.out_degree[j] += 1;
            }
        }
    }
    t.strongly_connected = w.rows() == w.cols() && is_strongly_connected(w);
    return t;
}

void Topology::validate() const {
    if (N <= 0 || weights.rows() != N || weights.cols() != N) {
        throw ValidationError("weight matrix must be N x N with N > 0");
    }
    for (int i = 0; i < N; ++i) {
        if (!(weights(i, i) > 0.0)) {
            throw ValidationError("weight diagonal must be positive (row " + std::to_string(i) + ")");
        }
        if ((weights.row(i).array() < 0.0).any()) {
            throw ValidationError("weights must be nonnegative (row " + std::to_string(i) + ")");
        }
        if (std::abs(weights.row(i).sum() - 1.0) > 1e-12) {
            throw ValidationError("weight matrix must be row stochastic (row " + std::to_string(i) + ")");
        }
    }
    if (!strongly_connected) {
        throw ValidationError("topology is not strongly connected");
    }
}

Topology metropolis_weights(int N, const std::vector<std::pair<int, int>>& edges) {
    if (N <= 0) {
        throw ValidationError("metropolis_weights needs at least one node");
    }
    Eigen::MatrixXi adj = Eigen::MatrixXi::Zero(N, N);
    for (const auto& [a, b] : edges) {
        if (a < 0 || b < 0 || a >= N || b >= N) {
            throw ValidationError("edge endpoint out of range");
        }
        if (a == b) {
            throw ValidationError("self-loop in Metropolis input graph");
        }
        adj(a, b) = 1;
        adj(b, a) = 1;
    }
    const Eigen::VectorXi deg = adj.rowwise().sum();

    // connected components for the diagnostic
    std::vector<int> comp(N, -1);
    int ncomp = 0;
    for (int s = 0; s < N; ++s) {
        if (comp[s] >= 0) {
            continue;
        }
        std::vector<int> stack{s};
        comp[s] = ncomp;
        while (!stack.empty()) {
            const int u = stack.back();
            stack.pop_back();
            for (int v = 0; v < N; ++v) {
                if (adj(u, v) && comp[v] < 0) {
                    comp[v] = ncomp;
                    stack.push_back(v);
                }
            }
        }
        ++ncomp;
    }
    if (ncomp > 1) {
        std::ostringstream os;
        os << "graph is disconnected; components:";
        for (int c = 0; c < ncomp; ++c) {
            os << " {";
            bool first = true;
            for (int v = 0; v < N; ++v) {
                if (comp[v] == c) {
                    os << (first ? "" : ",") << v;
                    first = false;
                }
            }
            os << "}";
        }
        throw ValidationError(os.str());
    }

    Mat w = Mat::Zero(N, N);
    for (int i = 0; i < N; ++i) {
        double off = 0.0;
        for (int j = 0; j < N; ++j) {
            if (adj(i, j)) {
                w(i, j) = 1.0 / (1.0 + std::max(deg(i), deg(j)));
                off += w(i, j);
            }
        }
        w(i, i) = 1.0 - off;
    }
    return Topology::from_weights(w);
}

GlobalConstraint build_global_constraint(const std::vector<AgentSpec>& agents, int n, double varpi) {
    std::vector<Vec> rows;
    std::vector<double> rhs;
    Mat stacked(0, n);
    for (const auto& a : agents) {
        if (!a.has_constraint()) {
            continue;
        }
        if (!linalg::has_full_row_rank(a.D)) {
            throw ValidationError("agent constraint matrix is neither zero nor full row rank");
        }
        for (Eigen::Index r = 0; r < a.D.rows(); ++r) {
            rows.emplace_back(a.D.row(r).transpose());
            rhs.push_back(a.d(r));
        }
    }
    GlobalConstraint gc;
    gc.D = Mat(0, n);
    gc.d = Vec(0);
    if (rows.empty()) {
        return gc;
    }

    Mat all(static_cast<Eigen::Index>(rows.size()), n);
    Vec all_d(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        all.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
        all_d(static_cast<Eigen::Index>(r)) = rhs[r];
    }

    // consistency: D x = d must be solvable
    const Vec x_ls = linalg::pseudo_inverse(all) * all_d;
    const double resid = (all * x_ls - all_d).norm();
    if (resid > 1e-8 * std::max(1.0, all_d.norm())) {
        std::ostringstream os;
        os << "agent constraints are inconsistent (least-squares residual " << resid << ")";
        throw ValidationError(os.str());
    }

    // greedy row selection keeps rows that raise the rank
    std::vector<Eigen::Index> keep;
    Mat cur(0, n);
    for (Eigen::Index r = 0; r < all.rows(); ++r) {
        Mat trial(cur.rows() + 1, n);
        trial << cur, all.row(r);
        if (linalg::rank(trial) == trial.rows()) {
            cur = trial;
            keep.push_back(r);
        }
    }
    gc.D.resize(static_cast<Eigen::Index>(keep.size()), n);
    gc.d.resize(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t r = 0; r < keep.size(); ++r) {
        const double norm = all.row(keep[r]).norm();
        gc.D.row(static_cast<Eigen::Index>(r)) = all.row(keep[r]) / norm;
        gc.d(static_cast<Eigen::Index>(r)) = all_d(keep[r]) / norm;
    }
    const double top = linalg::lambda_max(gc.D * gc.D.transpose());
    if (top > 1.0) {
        const double scale = 1.0 / std::sqrt(top);
        gc.D *= scale;
        gc.d *= scale;
    }
    if (varpi > 0.0) {
        const double bottom = linalg::lambda_min(gc.D * gc.D.transpose());
        if (bottom < varpi * (1.0 - 1e-12)) {
            std::ostringstream os;
            os << "global constraint violates varpi I <= D D^T: lambda_min " << bottom << " < varpi " << varpi;
            throw ValidationError(os.str());
        }
    }
    return gc;
}

Mat tangent_projector(const GlobalConstraint& gc, int n) {
    Mat I = Mat::Identity(n, n);
    if (gc.rows() == 0) {
        return I;
    }
    return I - gc.D.transpose() * linalg::spd_inverse(gc.D * gc.D.transpose(), "D D^T") * gc.D;
}

}  // namespace pdkf
