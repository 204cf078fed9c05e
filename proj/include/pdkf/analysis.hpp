#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pdkf/filter.hpp"
#include "pdkf/model.hpp"

namespace pdkf {

// ---------------------------------------------------------------- observability

struct EcoReport {
    int window = 0;
    Mat gramian;              // with constraint information
    Mat gramian_unconstrained;
    double alpha = 0.0;       // lambda_min(gramian)
    double alpha_unconstrained = 0.0;
    bool observable_with_constraints = false;
    bool observable_without_constraints = false;
};

/// Relative eigenvalue floor below which a gramian counts as singular.
inline constexpr double kEcoTolerance = 1e-10;

/// sum_{j=k0}^{k0+window} Phi^T (sum_i H_i^T R_i^-1 H_i + D_i^T D_i) Phi.
[[nodiscard]] EcoReport eco_check(const SystemModel& model, const std::vector<AgentSpec>& agents, int window,
                                  int k0 = 0);

// ---------------------------------------------------------------- beta

/// lambda_min(X (X+Q)^-1), X = A P A^T, clamped into (1e-6, 1-1e-6).
/// The inequality (A P' A^T + Q)^-1 >= beta A^-T P'^-1 A^-1 then holds for all P' >= P.
[[nodiscard]] double compute_beta(const Mat& P, const Mat& A, const Mat& Q);

/// lambda_max(X (X+Q)^-1), same clamp; the reverse inequality holds for all P' <= P.
[[nodiscard]] double compute_beta_bar(const Mat& P, const Mat& A, const Mat& Q);

struct BetaPair {
    double beta = 0.0;
    double beta_bar = 0.0;
};

/// beta = min and beta_bar = max of the per-matrix values over every matrix
/// the event-triggered P-recursion propagates during a T-step pilot with the
/// given per-agent thresholds.
[[nodiscard]] BetaPair pilot_betas_event(const SystemModel& model, const std::vector<AgentSpec>& agents,
                                         const Topology& topo, const std::vector<double>& delta, int T);

/// Same from a time-based pilot run with L fusion-projection steps.
[[nodiscard]] BetaPair pilot_betas_time(const SystemModel& model, const std::vector<AgentSpec>& agents,
                                        const Topology& topo, int L, int T);

// ---------------------------------------------------------------- thresholds

struct ThresholdReport {
    double beta = 0.0;
    int kstar = 0;
    std::vector<std::vector<Mat>> M;  // M[i][j]
    std::vector<Mat> M_bar;
    std::vector<double> agent_bound;
    std::vector<bool> M_bar_positive;
    double network_bound = 0.0;
};

/// Uniform-threshold design bounds; throws ValidationError if kstar < N + n.
[[nodiscard]] ThresholdReport threshold_bounds(const SystemModel& model, const std::vector<AgentSpec>& agents,
                                               const Topology& topo, double beta, int kstar);

// ---------------------------------------------------------------- decomposition

struct SpaceDecomposition {
    Mat F;        // n x n; D F = [0 | D_tilde]
    Mat D_tilde;  // s x s
    int s = 0;
};

[[nodiscard]] SpaceDecomposition space_decomposition(const GlobalConstraint& gc);

/// Last s components of F^-1 (xhat - x).
[[nodiscard]] Vec constraint_error(const Vec& xhat, const Vec& x, const Mat& F, int s);

/// Column-wise version for an n x M batch of errors.
[[nodiscard]] Mat constraint_error_batch(const Mat& errors, const Mat& F, int s);

// ---------------------------------------------------------------- rate analysis

/// V diag(max(lambda, 0)) V^T; throws ValidationError for asymmetric input.
[[nodiscard]] Mat eig_pos(const Mat& M);

/// Everything the f/z/l recursions consume.
struct RateModel {
    int N = 0;
    int n = 0;
    Mat A;
    Mat A_inv;
    Mat Q;
    Mat weights;
    std::vector<Mat> S;  // H^T R^-1 H
    std::vector<Mat> C;  // D^T D / eps
    std::vector<int> out_degree;
    double beta = 0.0;
    double beta_bar = 0.0;

    static RateModel build(const SystemModel& model, const std::vector<AgentSpec>& agents, const Topology& topo,
                           double beta, double beta_bar);
};

/// Upper bound on the information of successive broadcasts.
[[nodiscard]] Mat f_upper(const RateModel& rm, int t, int i);

/// Lower bound on the predicted information after t silent steps (direct recursion).
[[nodiscard]] Mat z_lower(const RateModel& rm, int t, int i, double delta);

/// delta-free part of z_lower.
[[nodiscard]] Mat z_bar(const RateModel& rm, int t, int i);

/// sum_{tau=2}^{t} beta^tau (A^-tau)^T A^-tau (zero for t < 2).
[[nodiscard]] Mat z_delta_weight(const RateModel& rm, int t);

/// beta^{t+1} (A^{-t-1})^T S_i A^{-t-1}.
[[nodiscard]] Mat l_term(const RateModel& rm, int t, int i);

/// Precomputed f_t, zbar_t and delta-weight tables for t = 0..T.
class RateTables {
  public:
    RateTables(const RateModel& rm, int T);

    [[nodiscard]] const Mat& f(int t, int i) const { return f_[t][i]; }
    [[nodiscard]] const Mat& zbar(int t, int i) const { return zbar_[t][i]; }
    [[nodiscard]] const Mat& delta_weight(int t) const { return dw_[t]; }
    [[nodiscard]] const Mat& l(int t, int i) const { return l_[t][i]; }
    [[nodiscard]] Mat z(int t, int i, double delta) const { return zbar_[t][i] - delta * dw_[t]; }
    [[nodiscard]] int horizon() const { return T_; }
    [[nodiscard]] const RateModel& model() const { return rm_; }

    /// lambda_max(f_t - eig_pos(z_t + delta I)).
    [[nodiscard]] double f_bar(int t, int i, double delta) const;
    /// lambda_max(f_t - eig_pos(z_t)) - delta.
    [[nodiscard]] double f_bar_alt(int t, int i, double delta) const;
    /// lambda_max(f_t - l_t) - delta.
    [[nodiscard]] double g_bar(int t, int i, double delta) const;

  private:
    RateModel rm_;
    int T_;
    std::vector<std::vector<Mat>> f_;
    std::vector<std::vector<Mat>> zbar_;
    std::vector<std::vector<Mat>> l_;
    std::vector<Mat> dw_;
};

/// Longest possible run of consecutive broadcasts: the first t in 0..T with
/// f_bar <= 0. Empty when f_bar > 0 throughout (no bound).
[[nodiscard]] std::optional<int> solve_T1(const RateTables& tab, int i, double delta);

/// Guaranteed silent run after a broadcast: the first t in 0..T with g_bar > 0
/// (T when none). Empty when g_bar(0) > 0 (no silence guaranteed).
[[nodiscard]] std::optional<int> solve_T2(const RateTables& tab, int i, double delta);

struct AgentRate {
    std::optional<int> T1;
    std::optional<int> T2;
    bool side_condition = false;  // sum_{tau=2}^{T1} beta^tau (A^-tau)^T A^-tau <= I
    bool feasible = false;        // member of the feasible set
    double silent_steps = 0.0;    // guaranteed silent steps over the horizon
    int first_alt_disagreement = -1;  // first t where the two f_bar forms disagree in sign
};

struct RateReport {
    double delta = 0.0;
    int T = 0;
    double beta = 0.0;
    double beta_bar = 0.0;
    std::vector<AgentRate> agents;
    bool available = false;   // feasible set nonempty
    double lambda0 = 1.0;     // finite-horizon bound
    double lambda_asymptotic = 1.0;
    std::string status;
};

/// Finite-horizon bound from per-agent run lengths; agents with an empty T1
/// or T2 are left out. T1 = 0 counts the agent as silent for the whole horizon.
[[nodiscard]] double lambda0_from_runs(const std::vector<std::optional<int>>& T1,
                                       const std::vector<std::optional<int>>& T2, const std::vector<int>& out_degree,
                                       int T);

[[nodiscard]] RateReport rate_bound(const RateTables& tab, double delta);

struct RateSweep {
    std::vector<RateReport> reports;
    BetaPair betas;
    bool monotone = true;  // lambda0 non-increasing along the (sorted) grid
};

/// Evaluate the bound on a delta grid with a single beta pair valid for every
/// grid point (min/max over event-triggered pilots at each delta), unless
/// `betas` overrides it.
[[nodiscard]] RateSweep rate_sweep(const SystemModel& model, const std::vector<AgentSpec>& agents,
                                   const Topology& topo, std::vector<double> deltas, int T,
                                   std::optional<BetaPair> betas = std::nullopt);

}  // namespace pdkf
