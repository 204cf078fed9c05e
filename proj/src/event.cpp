#include "pdkf/event.hpp"

#include <sstream>

namespace pdkf {

Mat multi_step_prediction(const Mat& P_t, const Mat& A, const Mat& Q, int steps) {
    if (steps < 0) {
        throw ValidationError("multi_step_prediction: steps must be nonnegative");
    }
    Mat P = P_t;
    for (int s = 0; s < steps; ++s) {
        P = linalg::symmetrize(A * P * A.transpose() + Q);
    }
    return P;
}

TriggerDecision trigger_eval(const Mat& P_tilde, const Mat& P_pred, double delta) {
    const Mat diff = linalg::spd_inverse(P_tilde, "trigger P~") - linalg::spd_inverse(P_pred, "trigger Pbar~");
    if (linalg::asymmetry(diff) > 1e-8 && diff.norm() > 0.0) {
        throw NumericalError("trigger_eval: information difference lost symmetry");
    }
    TriggerDecision out;
    out.g = linalg::lambda_max(diff) - delta;
    out.fired = out.g > 0.0;
    return out;
}

template <class State>
BasicEstimate<State> predicted_pair(BasicTriggerState<State>& ts, int k, const Mat& A, const Mat& Q) {
    if (k < ts.last_time) {
        throw ValidationError("predicted_pair: time runs backwards");
    }
    if (k < ts.cached_time) {
        ts.pred_x = ts.last_x;
        ts.pred_P = ts.last_P;
        ts.cached_time = ts.last_time;
    }
    while (ts.cached_time < k) {
        ts.pred_x = A * ts.pred_x;
        ts.pred_P = linalg::symmetrize(A * ts.pred_P * A.transpose() + Q);
        ++ts.cached_time;
    }
    return {ts.pred_x, ts.pred_P};
}

template <class State>
BasicEstimate<State> resolve_neighbor_pair(BasicTriggerState<State>& ts, int k, const Mat& A, const Mat& Q,
                                           const BasicBroadcastMessage<State>* incoming) {
    if (incoming != nullptr) {
        ts.last_x = incoming->x;
        ts.last_P = incoming->P;
        ts.last_time = k;
        ts.pred_x = incoming->x;
        ts.pred_P = incoming->P;
        ts.cached_time = k;
        return {incoming->x, incoming->P};
    }
    return predicted_pair(ts, k, A, Q);
}

template <class State>
BasicEventRound<State> epdkf_round(const std::vector<BasicEstimate<State>>& states,
                                   std::vector<BasicTriggerState<State>>& trig, const std::vector<State>& y,
                                   const SystemModel& model, const std::vector<AgentSpec>& agents,
                                   const Topology& topo, int k) {
    if (!model.time_invariant()) {
        throw ValidationError("epdkf_round: the event-triggered filter needs a time-invariant model");
    }
    const int N = topo.N;
    if (static_cast<int>(states.size()) != N || static_cast<int>(trig.size()) != N ||
        static_cast<int>(agents.size()) != N) {
        throw ValidationError("epdkf_round: one state/trigger/agent entry per node required");
    }
    const Mat& A = model.A.front();
    const Mat& Q = model.Q.front();

    // phase 1: local update and trigger decision
    std::vector<BasicEstimate<State>> fresh(N);
    std::vector<BasicEstimate<State>> shared(N);
    BasicEventRound<State> out;
    out.records.resize(N);
    for (int j = 0; j < N; ++j) {
        fresh[j] = predict(states[j], A, Q);
        if (agents[j].has_measurement()) {
            fresh[j] = measurement_update(fresh[j], y.at(j), agents[j].H, agents[j].R);
        }
        const auto held = predicted_pair(trig[j], k, A, Q);
        const auto dec = trigger_eval(fresh[j].P, held.P, trig[j].delta);
        out.records[j] = {k, j, dec.g, dec.fired};
        if (dec.fired) {
            const BasicBroadcastMessage<State> msg{j, fresh[j].x, fresh[j].P, k};
            shared[j] = resolve_neighbor_pair(trig[j], k, A, Q, &msg);
        } else {
            shared[j] = held;
        }
    }

    // phase 2: fuse own fresh pair with neighbour pairs, project once
    out.states.resize(N);
    for (int i = 0; i < N; ++i) {
        std::vector<const BasicEstimate<State>*> in{&fresh[i]};
        std::vector<double> w{topo.weights(i, i)};
        for (int j : topo.in_neighbors[i]) {
            in.push_back(&shared[j]);
            w.push_back(topo.weights(i, j));
        }
        const auto& a = agents[i];
        out.states[i] = project(ci_fuse(in, w), a.D, a.d, a.epsilon);
    }
    return out;
}

double communication_rate(const std::vector<int>& fire_counts, const std::vector<int>& out_degree, int steps) {
    if (fire_counts.size() != out_degree.size() || steps <= 0) {
        throw ValidationError("communication_rate: inconsistent inputs");
    }
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < fire_counts.size(); ++i) {
        const double silent = 1.0 - static_cast<double>(fire_counts[i]) / steps;
        num += silent * out_degree[i];
        den += out_degree[i];
    }
    if (den == 0.0) {
        return 0.0;
    }
    return 1.0 - num / den;
}

#define PDKF_INSTANTIATE(S)                                                                                      \
    template BasicEstimate<S> predicted_pair(BasicTriggerState<S>&, int, const Mat&, const Mat&);                \
    template BasicEstimate<S> resolve_neighbor_pair(BasicTriggerState<S>&, int, const Mat&, const Mat&,         \
                                                    const BasicBroadcastMessage<S>*);                           \
    template BasicEventRound<S> epdkf_round(const std::vector<BasicEstimate<S>>&,                                \
                                            std::vector<BasicTriggerState<S>>&, const std::vector<S>&,          \
                                            const SystemModel&, const std::vector<AgentSpec>&, const Topology&, \
                                            int);

PDKF_INSTANTIATE(Vec)
PDKF_INSTANTIATE(Mat)

#undef PDKF_INSTANTIATE

}  // namespace pdkf
