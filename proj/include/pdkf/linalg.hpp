#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace pdkf {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Raised when a model, scenario, or argument violates a documented invariant.
class ValidationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Raised when a numerical operation cannot proceed (singular or indefinite input).
class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Relative singular-value cutoff used for rank decisions and pseudo-inverses.
inline constexpr double kRankTolerance = 1e-9;

/// Diagonal jitter added when a parameter matrix fails a Cholesky check.
inline constexpr double kJitter = 1e-9;

namespace linalg {

[[nodiscard]] inline Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

/// Relative asymmetry ||M - M^T||_F / max(||M||_F, 1e-300).
[[nodiscard]] double asymmetry(const Mat& m);

[[nodiscard]] bool is_zero(const Mat& m);

/// Numerical rank with singular values below kRankTolerance * sigma_max discarded.
[[nodiscard]] Eigen::Index rank(const Mat& m, double rel_tol = kRankTolerance);

[[nodiscard]] bool has_full_row_rank(const Mat& m, double rel_tol = kRankTolerance);

/// Moore-Penrose pseudo-inverse by SVD thresholding at rel_tol * sigma_max.
[[nodiscard]] Mat pseudo_inverse(const Mat& m, double rel_tol = kRankTolerance);

[[nodiscard]] bool is_positive_definite(const Mat& m);

/// Inverse of a symmetric positive-definite matrix; throws NumericalError
/// with `what` in the message when the Cholesky factorization fails.
[[nodiscard]] Mat spd_inverse(const Mat& m, const char* what = "matrix");

/// Symmetrizes and, if Cholesky fails, adds kJitter * I (once). Throws if still not PD.
[[nodiscard]] Mat ensure_spd(const Mat& m, const char* what = "matrix");

[[nodiscard]] Vec symmetric_eigenvalues(const Mat& m);
[[nodiscard]] double lambda_max(const Mat& m);
[[nodiscard]] double lambda_min(const Mat& m);

/// 2-norm condition number from singular values (inf for singular input).
[[nodiscard]] double condition_number(const Mat& m);

/// A^p for integer p (negative powers use the inverse of A).
[[nodiscard]] Mat matrix_power(const Mat& a, int p);

/// Inverse square root of a symmetric positive-definite matrix.
[[nodiscard]] Mat spd_inverse_sqrt(const Mat& m);

}  // namespace linalg
}  // namespace pdkf
