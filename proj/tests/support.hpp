#pragma once

#include <random>

#include "pdkf/model.hpp"
#include "pdkf/sim.hpp"

namespace testsupport {

using pdkf::Mat;
using pdkf::Vec;

inline Mat scalar(double v) { return Mat::Constant(1, 1, v); }

inline Mat random_matrix(std::mt19937_64& rng, int r, int c) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Mat m(r, c);
    for (int i = 0; i < r; ++i) {
        for (int j = 0; j < c; ++j) {
            m(i, j) = nd(rng);
        }
    }
    return m;
}

// B B^T + floor I
inline Mat random_spd(std::mt19937_64& rng, int n, double floor = 0.1) {
    const Mat B = random_matrix(rng, n, n);
    return B * B.transpose() + floor * Mat::Identity(n, n);
}

inline Mat random_psd(std::mt19937_64& rng, int n, int rank) {
    const Mat B = random_matrix(rng, n, rank);
    return B * B.transpose();
}

inline Mat random_symmetric(std::mt19937_64& rng, int n) {
    const Mat B = random_matrix(rng, n, n);
    return 0.5 * (B + B.transpose());
}

/// Scalar system with N agents: A, Q, per-agent H/R, optional D (1 means x = 0 constraint).
inline pdkf::ScenarioConfig scalar_scenario(double a, double q, const std::vector<double>& h,
                                            const std::vector<double>& r, const std::vector<double>& dcoef,
                                            const Mat& weights, double eps = 1.0) {
    pdkf::ScenarioConfig cfg;
    cfg.name = "scalar";
    cfg.model.n = 1;
    cfg.model.A = {scalar(a)};
    cfg.model.Q = {scalar(q)};
    cfg.model.x0_mean = Vec::Zero(1);
    cfg.model.x0_cov = scalar(1.0);
    cfg.model.P0 = scalar(1.0);
    cfg.model.beta1 = a * a * 1.01;
    cfg.model.beta2 = a * a * 0.99;
    for (std::size_t i = 0; i < h.size(); ++i) {
        pdkf::AgentSpec s;
        s.H = scalar(h[i]);
        s.R = scalar(r[i]);
        s.D = scalar(dcoef[i]);
        s.d = Vec::Zero(1);
        s.epsilon = eps;
        s.P0 = scalar(10.0);
        s.x0 = Vec::Zero(1);
        cfg.agents.push_back(s);
    }
    cfg.topo = pdkf::Topology::from_weights(weights);
    cfg.horizon = 100;
    return cfg;
}

inline Mat two_agent_weights() { return Mat::Constant(2, 2, 0.5); }

inline Mat path3_weights() {
    Mat w(3, 3);
    w << 2.0 / 3, 1.0 / 3, 0, 1.0 / 3, 1.0 / 3, 1.0 / 3, 0, 1.0 / 3, 2.0 / 3;
    return w;
}

}  // namespace testsupport
