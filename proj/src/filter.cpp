#include "pdkf/filter.hpp"

#include <cmath>
#include <sstream>

namespace pdkf {

namespace {

// D x - d for a vector or each column of a batch
Vec constraint_residual(const Vec& x, const Mat& D, const Vec& d) { return D * x - d; }
Mat constraint_residual(const Mat& x, const Mat& D, const Vec& d) { return (D * x).colwise() - d; }

template <class State>
void check_dims(const BasicEstimate<State>& est, const Mat& A, const char* what) {
    if (A.cols() != est.P.rows() || est.x.rows() != est.P.rows()) {
        std::ostringstream os;
        os << what << ": dimension mismatch (x " << est.x.rows() << ", P " << est.P.rows() << "x" << est.P.cols()
           << ", operator " << A.rows() << "x" << A.cols() << ")";
        throw ValidationError(os.str());
    }
}

}  // namespace

ConsistentEstimate init_consistent(const Vec& xhat0, const Mat& P0, const Vec& x0_mean, double theta) {
    if (!(theta > 0.0)) {
        throw ValidationError("init_consistent: theta must be positive");
    }
    if (xhat0.size() != x0_mean.size() || P0.rows() != xhat0.size() || P0.cols() != xhat0.size()) {
        throw ValidationError("init_consistent: dimension mismatch");
    }
    const Vec bias = xhat0 - x0_mean;
    Mat P = (1.0 + theta) * P0 + ((theta + 1.0) / theta) * (bias * bias.transpose());
    P = linalg::symmetrize(P);
    if (!linalg::is_positive_definite(P)) {
        P.diagonal().array() += kInitJitter;
    }
    return {xhat0, P};
}

std::vector<ConsistentEstimate> initial_estimates(const SystemModel& model, const std::vector<AgentSpec>& agents) {
    std::vector<ConsistentEstimate> out;
    out.reserve(agents.size());
    for (const auto& a : agents) {
        const Vec x0 = a.x0.size() == model.n ? a.x0 : model.x0_mean;
        if (a.P0.size() > 0) {
            out.push_back({x0, linalg::symmetrize(a.P0)});
        } else {
            out.push_back(init_consistent(x0, model.P0, model.x0_mean, a.theta));
        }
    }
    return out;
}

template <class State>
BasicEstimate<State> predict(const BasicEstimate<State>& est, const Mat& A, const Mat& Q) {
    check_dims(est, A, "predict");
    return {A * est.x, linalg::symmetrize(A * est.P * A.transpose() + Q)};
}

template <class State>
BasicEstimate<State> measurement_update(const BasicEstimate<State>& est, const State& y, const Mat& H,
                                        const Mat& R) {
    if (H.size() == 0 || linalg::is_zero(H)) {
        return est;
    }
    check_dims(est, H, "measurement_update");
    const Mat PHt = est.P * H.transpose();
    const Mat S = H * PHt + R;
    const Mat K = PHt * linalg::spd_inverse(S, "innovation matrix H P H^T + R");
    const Eigen::Index n = est.P.rows();
    BasicEstimate<State> out;
    out.x = est.x + K * (y - H * est.x);
    out.P = linalg::symmetrize((Mat::Identity(n, n) - K * H) * est.P);
    return out;
}

template <class State>
BasicEstimate<State> ci_fuse(const std::vector<const BasicEstimate<State>*>& pairs,
                             const std::vector<double>& weights) {
    if (pairs.empty() || pairs.size() != weights.size()) {
        throw ValidationError("ci_fuse: need one weight per input pair");
    }
    double total = 0.0;
    for (double w : weights) {
        if (!(w > 0.0)) {
            throw ValidationError("ci_fuse: weights must be positive");
        }
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-12 * static_cast<double>(weights.size())) {
        throw ValidationError("ci_fuse: weights must sum to one");
    }
    const Eigen::Index n = pairs.front()->P.rows();
    Mat info = Mat::Zero(n, n);
    State info_x = State::Zero(pairs.front()->x.rows(), pairs.front()->x.cols());
    for (std::size_t j = 0; j < pairs.size(); ++j) {
        const Mat Pinv = linalg::spd_inverse(pairs[j]->P, "fusion input P");
        info += weights[j] * Pinv;
        info_x += weights[j] * (Pinv * pairs[j]->x);
    }
    BasicEstimate<State> out;
    out.P = linalg::spd_inverse(info, "fused information matrix");
    out.x = out.P * info_x;
    return out;
}

template <class State>
BasicEstimate<State> ci_fuse(const std::vector<BasicEstimate<State>>& pairs, const std::vector<double>& weights) {
    std::vector<const BasicEstimate<State>*> ptrs;
    ptrs.reserve(pairs.size());
    for (const auto& p : pairs) {
        ptrs.push_back(&p);
    }
    return ci_fuse(ptrs, weights);
}

template <class State>
BasicEstimate<State> project(const BasicEstimate<State>& est, const Mat& D, const Vec& d, double epsilon) {
    if (D.size() == 0 || linalg::is_zero(D)) {
        return est;
    }
    if (!(epsilon > 0.0)) {
        throw ValidationError("project: epsilon must be positive");
    }
    if (!linalg::has_full_row_rank(D)) {
        throw ValidationError("project: nonzero D must have full row rank");
    }
    check_dims(est, D, "project");
    const Mat PDt = est.P * D.transpose();
    const Mat DPDt = linalg::symmetrize(D * PDt);
    BasicEstimate<State> out;
    out.x = est.x - PDt * (linalg::pseudo_inverse(DPDt) * constraint_residual(est.x, D, d));
    const Mat reg = DPDt + epsilon * Mat::Identity(D.rows(), D.rows());
    // P - P D^T reg^-1 D P written in Joseph form; the subtraction loses digits along D when eps is small
    const Mat K = PDt * linalg::spd_inverse(reg, "D P D^T + eps I");
    const Mat IKD = Mat::Identity(est.P.rows(), est.P.cols()) - K * D;
    out.P = linalg::symmetrize(IKD * est.P * IKD.transpose() + epsilon * K * K.transpose());
    out.P = linalg::ensure_spd(out.P, "projected P");
    return out;
}

Mat project_limit(const Mat& P, const Mat& D) {
    if (D.size() == 0 || linalg::is_zero(D)) {
        return P;
    }
    const Mat PDt = P * D.transpose();
    return linalg::symmetrize(P - PDt * linalg::pseudo_inverse(linalg::symmetrize(D * PDt)) * PDt.transpose());
}

template <class State>
std::vector<BasicEstimate<State>> fusion_projection(std::vector<BasicEstimate<State>> pairs,
                                                    const std::vector<AgentSpec>& agents, const Topology& topo,
                                                    int L, bool project_on) {
    if (L < 1) {
        throw ValidationError("fusion_projection: L must be at least 1");
    }
    const int N = topo.N;
    for (int l = 0; l < L; ++l) {
        // every agent consumes the iteration-l snapshot of its neighbours
        std::vector<BasicEstimate<State>> next(N);
        for (int i = 0; i < N; ++i) {
            std::vector<const BasicEstimate<State>*> in{&pairs[i]};
            std::vector<double> w{topo.weights(i, i)};
            for (int j : topo.in_neighbors[i]) {
                in.push_back(&pairs[j]);
                w.push_back(topo.weights(i, j));
            }
            auto fused = ci_fuse(in, w);
            if (project_on) {
                const auto& a = agents[i];
                fused = project(fused, a.D, a.d, a.epsilon);
            }
            next[i] = std::move(fused);
        }
        pairs = std::move(next);
    }
    return pairs;
}

template <class State>
std::vector<BasicEstimate<State>> tpdkf_round(const std::vector<BasicEstimate<State>>& states,
                                              const std::vector<State>& y, const SystemModel& model,
                                              const std::vector<AgentSpec>& agents, const Topology& topo, int k,
                                              int L, bool project_on) {
    const int N = topo.N;
    if (static_cast<int>(states.size()) != N || static_cast<int>(agents.size()) != N) {
        throw ValidationError("tpdkf_round: states/agents must have one entry per node");
    }
    const Mat& A = model.A_at(k - 1);
    const Mat& Q = model.Q_at(k - 1);
    std::vector<BasicEstimate<State>> local(N);
    for (int i = 0; i < N; ++i) {
        local[i] = predict(states[i], A, Q);
        if (agents[i].has_measurement()) {
            local[i] = measurement_update(local[i], y.at(i), agents[i].H, agents[i].R);
        }
    }
    return fusion_projection(std::move(local), agents, topo, L, project_on);
}

#define PDKF_INSTANTIATE(S)                                                                                       \
    template BasicEstimate<S> predict(const BasicEstimate<S>&, const Mat&, const Mat&);                           \
    template BasicEstimate<S> measurement_update(const BasicEstimate<S>&, const S&, const Mat&, const Mat&);       \
    template BasicEstimate<S> ci_fuse(const std::vector<const BasicEstimate<S>*>&, const std::vector<double>&);  \
    template BasicEstimate<S> ci_fuse(const std::vector<BasicEstimate<S>>&, const std::vector<double>&);         \
    template BasicEstimate<S> project(const BasicEstimate<S>&, const Mat&, const Vec&, double);                   \
    template std::vector<BasicEstimate<S>> fusion_projection(std::vector<BasicEstimate<S>>,                      \
                                                             const std::vector<AgentSpec>&, const Topology&, int, \
                                                             bool);                                               \
    template std::vector<BasicEstimate<S>> tpdkf_round(const std::vector<BasicEstimate<S>>&,                     \
                                                       const std::vector<S>&, const SystemModel&,                 \
                                                       const std::vector<AgentSpec>&, const Topology&, int, int,  \
                                                       bool);

PDKF_INSTANTIATE(Vec)
PDKF_INSTANTIATE(Mat)

#undef PDKF_INSTANTIATE

}  // namespace pdkf
