#pragma once

#include <vector>

#include "pdkf/linalg.hpp"
#include "pdkf/model.hpp"

namespace pdkf {

/// Estimate pair (x, P). State is a Vec for one realization or an n x M
/// matrix holding M Monte Carlo realizations that share the same P.
template <class State>
struct BasicEstimate {
    State x;
    Mat P;
};

using ConsistentEstimate = BasicEstimate<Vec>;
using EstimateBatch = BasicEstimate<Mat>;

/// Covariance jitter added to the initial bound when it is singular.
inline constexpr double kInitJitter = 1e-9;

/// (1+theta) P0 + ((theta+1)/theta) (x0 - mean)(x0 - mean)^T.
[[nodiscard]] ConsistentEstimate init_consistent(const Vec& xhat0, const Mat& P0, const Vec& x0_mean,
                                                 double theta);

/// Per-agent starting estimates: the agent's explicit P0 when declared,
/// otherwise init_consistent on the model bound with the agent's theta.
[[nodiscard]] std::vector<ConsistentEstimate> initial_estimates(const SystemModel& model,
                                                                const std::vector<AgentSpec>& agents);

template <class State>
[[nodiscard]] BasicEstimate<State> predict(const BasicEstimate<State>& est, const Mat& A, const Mat& Q);

/// Identity when H is zero.
template <class State>
[[nodiscard]] BasicEstimate<State> measurement_update(const BasicEstimate<State>& est, const State& y,
                                                      const Mat& H, const Mat& R);

/// Covariance-intersection fusion: P = (sum a_j P_j^-1)^-1, x = P sum a_j P_j^-1 x_j.
template <class State>
[[nodiscard]] BasicEstimate<State> ci_fuse(const std::vector<const BasicEstimate<State>*>& pairs,
                                           const std::vector<double>& weights);

template <class State>
[[nodiscard]] BasicEstimate<State> ci_fuse(const std::vector<BasicEstimate<State>>& pairs,
                                           const std::vector<double>& weights);

/// Hard projection of the state, regularized (epsilon) shrink of P.
template <class State>
[[nodiscard]] BasicEstimate<State> project(const BasicEstimate<State>& est, const Mat& D, const Vec& d,
                                           double epsilon);

/// P - P D^T (D P D^T)^+ D P: the epsilon -> 0 limit of the projected matrix.
[[nodiscard]] Mat project_limit(const Mat& P, const Mat& D);

/// L synchronized exchange/fuse/project iterations starting from the
/// measurement-updated pairs. project_on = false gives plain CI consensus.
template <class State>
[[nodiscard]] std::vector<BasicEstimate<State>> fusion_projection(std::vector<BasicEstimate<State>> pairs,
                                                                  const std::vector<AgentSpec>& agents,
                                                                  const Topology& topo, int L,
                                                                  bool project_on = true);

/// One time-based step from k-1 to k. y[i] is agent i's measurement at k
/// (unused when H_i = 0).
template <class State>
[[nodiscard]] std::vector<BasicEstimate<State>> tpdkf_round(const std::vector<BasicEstimate<State>>& states,
                                                            const std::vector<State>& y,
                                                            const SystemModel& model,
                                                            const std::vector<AgentSpec>& agents,
                                                            const Topology& topo, int k, int L,
                                                            bool project_on = true);

}  // namespace pdkf
