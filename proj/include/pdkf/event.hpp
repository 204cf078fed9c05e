#pragma once

#include <optional>
#include <vector>

#include "pdkf/filter.hpp"
#include "pdkf/model.hpp"

namespace pdkf {

/// h^steps(P) with h(X) = A X A^T + Q; steps = 0 returns P.
[[nodiscard]] Mat multi_step_prediction(const Mat& P_t, const Mat& A, const Mat& Q, int steps);

struct TriggerDecision {
    double g = 0.0;
    bool fired = false;
};

/// g = lambda_max(P~^-1 - Pbar~^-1) - delta; fires only for g > 0.
[[nodiscard]] TriggerDecision trigger_eval(const Mat& P_tilde, const Mat& P_pred, double delta);

/// Last broadcast of one agent and the cached multi-step prediction of it.
template <class State>
struct BasicTriggerState {
    State last_x;
    Mat last_P;
    int last_time = 0;
    double delta = 0.0;

    // prediction of (last_x, last_P) advanced to cached_time
    State pred_x;
    Mat pred_P;
    int cached_time = 0;

    static BasicTriggerState initial(const BasicEstimate<State>& broadcast, double delta, int k0 = 0) {
        return {broadcast.x, broadcast.P, k0, delta, broadcast.x, broadcast.P, k0};
    }
};

using TriggerState = BasicTriggerState<Vec>;

template <class State>
struct BasicBroadcastMessage {
    int sender = 0;
    State x;
    Mat P;
    int k = 0;
};

using BroadcastMessage = BasicBroadcastMessage<Vec>;

/// The silent-sender substitute (A^{k-t} x~_t, h^{k-t}(P~_t)); advances the
/// cache one step at a time.
template <class State>
[[nodiscard]] BasicEstimate<State> predicted_pair(BasicTriggerState<State>& ts, int k, const Mat& A, const Mat& Q);

/// Fresh pair if `incoming` is given (and the state is updated), otherwise the predicted pair.
template <class State>
[[nodiscard]] BasicEstimate<State> resolve_neighbor_pair(BasicTriggerState<State>& ts, int k, const Mat& A,
                                                         const Mat& Q,
                                                         const BasicBroadcastMessage<State>* incoming);

struct TriggerRecord {
    int step = 0;
    int agent = 0;
    double g = 0.0;
    bool fired = false;
};

template <class State>
struct BasicEventRound {
    std::vector<BasicEstimate<State>> states;
    std::vector<TriggerRecord> records;  // one per agent
};

/// One event-triggered step from k-1 to k. Thresholds are taken from
/// trig[i].delta. Requires a time-invariant model.
template <class State>
[[nodiscard]] BasicEventRound<State> epdkf_round(const std::vector<BasicEstimate<State>>& states,
                                                 std::vector<BasicTriggerState<State>>& trig,
                                                 const std::vector<State>& y, const SystemModel& model,
                                                 const std::vector<AgentSpec>& agents, const Topology& topo, int k);

/// lambda = 1 - sum_i p_i |N_out,i| / sum_i |N_out,i| from per-agent fire counts
/// over `steps` opportunities.
[[nodiscard]] double communication_rate(const std::vector<int>& fire_counts, const std::vector<int>& out_degree,
                                        int steps);

}  // namespace pdkf
