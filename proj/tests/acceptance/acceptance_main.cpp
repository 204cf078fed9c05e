// Acceptance suite: one PASS/FAIL line per criterion; exit status = number of failures.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "pdkf/analysis.hpp"
#include "pdkf/event.hpp"
#include "pdkf/filter.hpp"
#include "pdkf/scenario_io.hpp"
#include "pdkf/sim.hpp"

using namespace pdkf;

namespace {

// ---- pinned tolerances and budgets
constexpr double kResidualTol = 1e-9;
constexpr double kC1Seconds = 1.0;
constexpr int kMcTrials = 1000;
constexpr double kConsistencySlack = 0.15;
constexpr double kC2Seconds = 120.0;
constexpr double kEcoAlphaZero = 1e-10;
constexpr double kSteadyChange = 0.01;
constexpr double kBaselineGrowth = 10.0;
constexpr double kC3Seconds = 30.0;
constexpr double kL8Fraction = 0.25;
constexpr double kEnvelopeLo = 0.3;
constexpr double kEnvelopeHi = 0.8;
constexpr double kTraceMonotoneSlack = 1e-9;  // relative
constexpr double kR2Min = 0.8;
constexpr double kLambdaPaper = 0.311;
constexpr double kLambdaTol = 0.02;
constexpr double kC6Seconds = 1.0;
constexpr double kGapFactor = 100.0;
constexpr double kRateSlack = 1e-12;
constexpr int kRateScenariosMin = 5;
constexpr double kPropertyTol = 1e-8;
constexpr double kEigPosTol = 1e-10;
constexpr double kZeroEigScaled = 1e-6;
constexpr int kPropertyInstances = 100;

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
    std::printf("criterion %2d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!pass) {
        ++failures;
    }
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void run_guarded(int id, const std::function<void()>& body) {
    try {
        body();
    } catch (const std::exception& e) {
        report(id, false, std::string("exception: ") + e.what());
    }
}

Mat random_matrix(std::mt19937_64& rng, int r, int c) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Mat m(r, c);
    for (int i = 0; i < r; ++i) {
        for (int j = 0; j < c; ++j) {
            m(i, j) = nd(rng);
        }
    }
    return m;
}

Mat random_spd(std::mt19937_64& rng, int n) {
    const Mat B = random_matrix(rng, n, n);
    return B * B.transpose() + 0.1 * Mat::Identity(n, n);
}

// ---------------------------------------------------------------- 1
void criterion1() {
    auto cfg = builtin_case1();
    cfg.trials = 1;
    const auto t0 = std::chrono::steady_clock::now();
    const auto m = run_time_based(cfg);
    const double secs = seconds_since(t0);
    const double worst = *std::max_element(m.constraint_residual.begin(), m.constraint_residual.end());
    report(1, worst <= kResidualTol && secs < kC1Seconds,
           fmt("max |D x - d|_inf = %.3e (tol %.0e), %.3f s", worst, kResidualTol, secs));
}

// ---------------------------------------------------------------- 2
double consistency_ratio(const RunMetrics& m, int n, const std::vector<int>& ks) {
    double worst = -std::numeric_limits<double>::infinity();
    for (int k : ks) {
        for (int i = 0; i < m.agents; ++i) {
            const Mat& P = m.P[k][i];
            const double excess = linalg::lambda_max(linalg::symmetrize(m.error_moment[k][i] - P));
            worst = std::max(worst, excess / (kConsistencySlack * P.trace() / n));
        }
    }
    return worst;
}

void criterion2() {
    const auto t0 = std::chrono::steady_clock::now();
    auto cfg = builtin_case1();
    cfg.trials = kMcTrials;
    const auto tb = run_time_based(cfg);
    cfg.mode = Mode::EventTriggered;
    set_thresholds(cfg, {0.3, 0.4, 0.8});
    const auto ev = run_event(cfg);
    const double secs = seconds_since(t0);
    const std::vector<int> ks{50, 150, 250};
    const double rt = consistency_ratio(tb, cfg.model.n, ks);
    const double re = consistency_ratio(ev, cfg.model.n, ks);
    report(2, rt <= 1.0 && re <= 1.0 && secs < kC2Seconds,
           fmt("max lambda_max(C-P)/(%.2f tr P/n): time-based %.3f, event %.3f (<= 1), %d trials, %.1f s",
               kConsistencySlack, rt, re, kMcTrials, secs));
}

// ---------------------------------------------------------------- 3
void criterion3() {
    const auto t0 = std::chrono::steady_clock::now();
    auto cfg = builtin_case1();
    const auto eco = eco_check(cfg.model, cfg.agents, 2 * cfg.model.n);
    const auto tb = run_time_based(cfg);
    const auto ckf = ckf_baseline(cfg);
    const auto con = consensus_baseline(cfg);
    const double secs = seconds_since(t0);
    const double change = std::abs(tb.trace_p[250] - tb.trace_p[100]) / tb.trace_p[100];
    const double g_ckf = ckf.trace_p[250] / ckf.trace_p[100];
    const double g_con = con.trace_p[250] / con.trace_p[100];
    const bool pass = eco.alpha > 0.0 && eco.alpha_unconstrained < kEcoAlphaZero && change < kSteadyChange &&
                      g_ckf >= kBaselineGrowth && g_con >= kBaselineGrowth && secs < kC3Seconds;
    report(3, pass,
           fmt("alpha %.3e / unconstrained %.1e; TPDKF trace change %.2e; CKF x%.1f, consensus x%.1f; %.2f s",
               eco.alpha, eco.alpha_unconstrained, change, g_ckf, g_con, secs));
}

// ---------------------------------------------------------------- 4
void criterion4() {
    auto cfg = builtin_case1();
    cfg.trials = kMcTrials;
    const auto gc = build_global_constraint(cfg.agents, cfg.model.n);
    const auto sd = space_decomposition(gc);
    const Mat G = sd.F.inverse().bottomRows(sd.s);
    std::vector<double> trace_ss, var_ss;
    for (int L : {1, 2, 4, 8}) {
        cfg.L = L;
        const auto m = run_time_based(cfg);
        double tr = 0.0, var = 0.0;
        int count = 0;
        for (int k = 150; k <= cfg.horizon; ++k) {
            tr += m.trace_p[k];
            for (int i = 0; i < m.agents; ++i) {
                var += (G * m.error_moment[k][i] * G.transpose()).trace();
            }
            ++count;
        }
        trace_ss.push_back(tr / count);
        var_ss.push_back(var / (count * m.agents));
    }
    bool monotone = true;
    for (std::size_t j = 1; j < trace_ss.size(); ++j) {
        monotone = monotone && trace_ss[j] <= trace_ss[j - 1] * (1.0 + kTraceMonotoneSlack);
    }
    const double frac = var_ss[3] / var_ss[0];
    const double ratio = var_ss[2] / var_ss[1];
    const bool pass = monotone && frac <= kL8Fraction && ratio >= kEnvelopeLo && ratio <= kEnvelopeHi;
    report(4, pass,
           fmt("trace(P) L=1,2,4,8: %.4f %.4f %.4f %.4f (non-increasing: %s); constraint-subspace variance "
               "%.2e %.2e %.2e %.2e; L8/L1 = %.2e (<= %.2f); L4/L2 = %.2e (in [%.1f, %.1f])",
               trace_ss[0], trace_ss[1], trace_ss[2], trace_ss[3], monotone ? "yes" : "no", var_ss[0],
               var_ss[1], var_ss[2], var_ss[3], frac, kL8Fraction, ratio, kEnvelopeLo, kEnvelopeHi));
}

// ---------------------------------------------------------------- 5
void criterion5() {
    auto cfg = builtin_case1();
    cfg.trials = kMcTrials;
    cfg.horizon = 100;
    Vec offset = Vec::Zero(4);
    offset << 50, 50, 0, 0;
    for (auto& a : cfg.agents) {
        a.x0 = cfg.model.x0_mean + offset;
    }
    const auto m = run_time_based(cfg);
    double worst_slope = -1e300, worst_r2 = 1.0;
    for (int i = 0; i < m.agents; ++i) {
        // least-squares line through (k, log |mean error|)
        double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
        int cnt = 0;
        for (int k = 5; k <= 100; ++k) {
            const double y = std::log(m.mean_error[k][i].norm());
            sx += k;
            sy += y;
            sxx += double(k) * k;
            sxy += k * y;
            syy += y * y;
            ++cnt;
        }
        const double cov = sxy - sx * sy / cnt;
        const double vx = sxx - sx * sx / cnt;
        const double vy = syy - sy * sy / cnt;
        const double slope = cov / vx;
        const double r2 = cov * cov / (vx * vy);
        worst_slope = std::max(worst_slope, slope);
        worst_r2 = std::min(worst_r2, r2);
    }
    report(5, worst_slope < 0.0 && worst_r2 >= kR2Min,
           fmt("log-mean-error fit over k in [5,100]: max slope %.4f (< 0), min R^2 %.3f (>= %.1f)", worst_slope,
               worst_r2, kR2Min));
}

// ---------------------------------------------------------------- 6
void criterion6() {
    auto cfg = builtin_case1();
    cfg.mode = Mode::EventTriggered;
    set_thresholds(cfg, {0.3, 0.4, 0.8});
    const auto t0 = std::chrono::steady_clock::now();
    const auto m = run_event(cfg);
    const double secs = seconds_since(t0);
    report(6, std::abs(m.lambda - kLambdaPaper) <= kLambdaTol && secs < kC6Seconds,
           fmt("lambda = %.4f (target %.3f +- %.2f), fire counts %d/%d/%d, %.3f s", m.lambda, kLambdaPaper,
               kLambdaTol, m.fire_counts[0], m.fire_counts[1], m.fire_counts[2], secs));
}

// ---------------------------------------------------------------- 7
void criterion7() {
    const std::vector<double> grid{0.12, 0.42, 0.57, 0.97, 2.00};
    std::vector<double> pe;
    for (double d : grid) {
        auto cfg = builtin_case1();
        cfg.mode = Mode::EventTriggered;
        set_thresholds(cfg, {d});
        const auto m = run_event(cfg);
        // mean over agents of the worst trace after the transient
        double acc = 0.0;
        for (int i = 0; i < m.agents; ++i) {
            double worst = 0.0;
            for (int k = 50; k <= cfg.horizon; ++k) {
                worst = std::max(worst, m.P[k][i].trace());
            }
            acc += worst;
        }
        pe.push_back(acc / m.agents);
    }
    bool monotone = true;
    for (std::size_t j = 1; j < pe.size(); ++j) {
        monotone = monotone && pe[j] >= pe[j - 1];
    }
    const double gap = pe.back() / pe.front();
    report(7, monotone && gap >= kGapFactor,
           fmt("P_e at delta 0.12/0.42/0.57/0.97/2.00: %.4g %.4g %.4g %.4g %.4g; ratio %.0f (>= %.0f)", pe[0], pe[1],
               pe[2], pe[3], pe[4], gap, kGapFactor));
}

// ---------------------------------------------------------------- 8
struct RateCase {
    std::string name;
    ScenarioConfig cfg;
    std::vector<double> grid;
};

ScenarioConfig scalar_case(double a, double q, std::vector<double> h, std::vector<double> r,
                           std::vector<double> dcoef, const Mat& w, double eps) {
    ScenarioConfig cfg;
    cfg.model.n = 1;
    cfg.model.A = {Mat::Constant(1, 1, a)};
    cfg.model.Q = {Mat::Constant(1, 1, q)};
    cfg.model.x0_mean = Vec::Zero(1);
    cfg.model.x0_cov = Mat::Constant(1, 1, 1.0);
    cfg.model.P0 = Mat::Constant(1, 1, 1.0);
    cfg.model.beta1 = a * a * 1.01;
    cfg.model.beta2 = a * a * 0.99;
    for (std::size_t i = 0; i < h.size(); ++i) {
        AgentSpec s;
        s.H = Mat::Constant(1, 1, h[i]);
        s.R = Mat::Constant(1, 1, r[i]);
        s.D = Mat::Constant(1, 1, dcoef[i]);
        s.d = Vec::Zero(1);
        s.epsilon = eps;
        s.x0 = Vec::Zero(1);
        s.P0 = Mat::Constant(1, 1, 1.0);
        cfg.agents.push_back(s);
    }
    cfg.topo = Topology::from_weights(w);
    cfg.horizon = 100;
    cfg.mode = Mode::EventTriggered;
    return cfg;
}

std::vector<RateCase> rate_cases() {
    const Mat w2 = Mat::Constant(2, 2, 0.5);
    Mat w3(3, 3);
    w3 << 2.0 / 3, 1.0 / 3, 0, 1.0 / 3, 1.0 / 3, 1.0 / 3, 0, 1.0 / 3, 2.0 / 3;
    const std::vector<double> g{0.3, 0.5, 0.8, 1.2, 2.0};
    std::vector<RateCase> out;
    out.push_back({"scalar A=1", scalar_case(1.0, 1.0, {1.0, 0.5}, {1.0, 2.0}, {0.0, 0.0}, w2, 1.0), g});
    out.push_back({"scalar A=0.9", scalar_case(0.9, 1.0, {1.0, 0.5}, {1.0, 2.0}, {0.0, 0.0}, w2, 1.0), g});
    out.push_back({"scalar A=1.1 constrained",
                   scalar_case(1.1, 2.0, {1.0, 0.5}, {1.0, 2.0}, {1.0, 0.0}, w2, 1.0), g});
    out.push_back({"scalar 3-path", scalar_case(1.0, 1.0, {1.0, 0.0, 1.0}, {1.0, 1.0, 2.0}, {0.0, 0.0, 0.0}, w3, 1.0),
                   g});
    // seeded random scalar pairs
    std::mt19937_64 rng(20261016);
    std::uniform_real_distribution<double> ua(0.9, 1.1), uq(0.5, 2.0), uh(0.3, 1.0), ur(0.5, 3.0);
    for (int s = 0; s < 2; ++s) {
        const double a = ua(rng), q = uq(rng);
        const std::vector<double> h{uh(rng), uh(rng)}, r{ur(rng), ur(rng)};
        out.push_back({fmt("scalar seeded #%d", s), scalar_case(a, q, h, r, {0.0, 0.0}, w2, 1.0), g});
    }
    // vehicle on the three-agent path with a softer constraint weight
    auto veh = builtin_case1();
    for (auto& a : veh.agents) {
        a.epsilon = 1.0;
    }
    veh.horizon = 100;
    veh.mode = Mode::EventTriggered;
    out.push_back({"vehicle path eps=1", veh, {0.5, 1.0, 2.0, 5.0, 10.0}});
    auto c1 = builtin_case1();
    c1.horizon = 100;
    c1.mode = Mode::EventTriggered;
    out.push_back({"vehicle path (case 1)", c1, {0.3, 0.97, 1.0, 2.0, 5.0}});
    return out;
}

void criterion8() {
    int informative_cases = 0;
    bool sound = true, monotone = true;
    std::string detail;
    for (auto& rc : rate_cases()) {
        const auto sw = rate_sweep(rc.cfg.model, rc.cfg.agents, rc.cfg.topo, rc.grid, rc.cfg.horizon);
        monotone = monotone && sw.monotone;
        // a scenario counts when some grid point is feasible with a bound below 1
        bool informative = false;
        std::string pts;
        for (const auto& r : sw.reports) {
            if (!r.available) {
                pts += fmt(" d=%.2g:-", r.delta);
                continue;
            }
            auto cfg = rc.cfg;
            set_thresholds(cfg, {r.delta});
            const double measured = run_event(cfg).lambda;
            sound = sound && measured <= r.lambda0 + kRateSlack;
            informative = informative || r.lambda0 < 1.0;
            pts += fmt(" d=%.2g:%.3f<=%.3f", r.delta, measured, r.lambda0);
        }
        if (informative) {
            ++informative_cases;
        }
        detail += "[" + rc.name + pts + "] ";
    }
    report(8, sound && monotone && informative_cases >= kRateScenariosMin,
           fmt("%d scenarios with a feasible bound below 1 (>= %d); lambda <= lambda0 %s; lambda0 monotone %s; ",
               informative_cases, kRateScenariosMin, sound ? "yes" : "no", monotone ? "yes" : "no") +
               detail);
}

// ---------------------------------------------------------------- 9
void criterion9() {
    std::mt19937_64 rng(909);
    int bad_lemma4 = 0, bad_eigpos = 0, bad_info = 0, bad_sandwich = 0, bad_zero = 0, bad_fusion = 0;
    double worst_info = 0.0, worst_fusion = 0.0;
    for (int t = 0; t < kPropertyInstances; ++t) {
        const int n = 2 + static_cast<int>(rng() % 4);
        // Pi0 <= Pi1, Pi1 > 0  =>  Pi0 Pi1^-1 Pi0 <= Pi0
        const Mat B0 = random_matrix(rng, n, n - 1);
        const Mat Pi0 = B0 * B0.transpose();
        const Mat Pi1 = Pi0 + random_spd(rng, n);
        const Mat lhs = Pi0 * Pi1.inverse() * Pi0;
        if (linalg::lambda_min(linalg::symmetrize(Pi0 + kPropertyTol * Mat::Identity(n, n) - lhs)) < 0.0) {
            ++bad_lemma4;
        }
        const Mat S = random_matrix(rng, n, n);
        const Mat Sym = 0.5 * (S + S.transpose());
        if (linalg::lambda_min(linalg::symmetrize(eig_pos(Sym) - Sym)) < -kEigPosTol) {
            ++bad_eigpos;
        }
        // projection identities
        const Mat P = random_spd(rng, n);
        const int rows = 1 + static_cast<int>(rng() % (n - 1));
        const Mat D = random_matrix(rng, rows, n);
        const double eps = std::pow(10.0, -3.0 + 3.0 * (rng() % 1000) / 1000.0);
        const auto pr = project(ConsistentEstimate{Vec::Zero(n), P}, D, Vec::Zero(rows), eps);
        const Mat Pinv = P.inverse();
        const Mat info_err = pr.P.inverse() - Pinv - D.transpose() * D / eps;
        worst_info = std::max(worst_info, info_err.norm() / Pinv.norm());
        if (info_err.norm() / Pinv.norm() > kPropertyTol) {
            ++bad_info;
        }
        const Mat lim = project_limit(P, D);
        if (linalg::lambda_min(linalg::symmetrize(P - pr.P)) < -kPropertyTol ||
            linalg::lambda_min(linalg::symmetrize(pr.P - lim)) < -kPropertyTol) {
            ++bad_sandwich;
        }
        const auto ev = linalg::symmetric_eigenvalues(lim / lim.trace());
        const int zeros = static_cast<int>((ev.array() < kZeroEigScaled).count());
        if (zeros != linalg::rank(D)) {
            ++bad_zero;
        }
    }
    // L-step information identity on 3-agent path instances
    Mat W(3, 3);
    W << 2.0 / 3, 1.0 / 3, 0, 1.0 / 3, 1.0 / 3, 1.0 / 3, 0, 1.0 / 3, 2.0 / 3;
    const auto topo = Topology::from_weights(W);
    for (int t = 0; t < 30; ++t) {
        const int n = 3;
        std::vector<AgentSpec> agents(3);
        std::vector<ConsistentEstimate> pairs;
        for (int j = 0; j < 3; ++j) {
            agents[j].H = Mat::Zero(1, n);
            agents[j].R = Mat::Identity(1, 1);
            const Vec x = random_matrix(rng, n, 1);
            agents[j].D = (rng() % 3 == 0) ? Mat(Mat::Zero(1, n)) : random_matrix(rng, 1, n);
            agents[j].d = Vec::Zero(1);
            agents[j].epsilon = 0.1 + (rng() % 100) / 50.0;
            pairs.push_back({x, random_spd(rng, n)});
        }
        for (int L : {1, 2, 3, 5}) {
            const auto out = fusion_projection(pairs, agents, topo, L, true);
            for (int i = 0; i < 3; ++i) {
                Mat expect = Mat::Zero(n, n);
                const Mat WL = linalg::matrix_power(W, L);
                for (int j = 0; j < 3; ++j) {
                    expect += WL(i, j) * pairs[j].P.inverse();
                }
                for (int s = 0; s < L; ++s) {
                    const Mat Ws = linalg::matrix_power(W, s);
                    for (int j = 0; j < 3; ++j) {
                        expect += Ws(i, j) * agents[j].constraint_information();
                    }
                }
                const double rel = (out[i].P.inverse() - expect).norm() / expect.norm();
                worst_fusion = std::max(worst_fusion, rel);
                if (rel > kPropertyTol) {
                    ++bad_fusion;
                }
            }
        }
    }
    const bool pass = !(bad_lemma4 || bad_eigpos || bad_info || bad_sandwich || bad_zero || bad_fusion);
    report(9, pass,
           fmt("violations: matrix-approximation %d, eig_pos %d, information identity %d, sandwich %d, "
               "zero-eigenvalue count %d, L-step fusion identity %d (worst relative: information %.1e, fusion "
               "%.1e; tol %.0e)",
               bad_lemma4, bad_eigpos, bad_info, bad_sandwich, bad_zero, bad_fusion, worst_info, worst_fusion,
               kPropertyTol));
}

// ---------------------------------------------------------------- 10
bool same_metrics(const RunMetrics& a, const RunMetrics& b) {
    if (a.mse != b.mse || a.trace_p != b.trace_p || a.constraint_residual != b.constraint_residual ||
        a.mean_error_norm != b.mean_error_norm || a.fire_counts != b.fire_counts) {
        return false;
    }
    for (std::size_t r = 0; r < a.trigger_log.size(); ++r) {
        if (a.trigger_log[r].g != b.trigger_log[r].g || a.trigger_log[r].fired != b.trigger_log[r].fired) {
            return false;
        }
    }
    return a.trigger_log.size() == b.trigger_log.size();
}

void criterion10() {
    auto cfg = builtin_case1();
    cfg.trials = 20;
    cfg.seed = 7;
    // replay through the resolved scenario text, as a manifest would
    const auto replay = parse_scenario(scenario_to_json(cfg), "manifest");
    const bool tb = same_metrics(monte_carlo(cfg), monte_carlo(replay));
    cfg.mode = Mode::EventTriggered;
    set_thresholds(cfg, {0.3, 0.4, 0.8});
    auto replay_ev = parse_scenario(scenario_to_json(cfg), "manifest");
    const auto e1 = monte_carlo(cfg);
    const bool ev = same_metrics(e1, monte_carlo(replay_ev));
    cfg.seed = 8;
    const auto e2 = monte_carlo(cfg);
    bool logs = e1.trigger_log.size() == e2.trigger_log.size();
    for (std::size_t r = 0; logs && r < e1.trigger_log.size(); ++r) {
        logs = e1.trigger_log[r].fired == e2.trigger_log[r].fired && e1.trigger_log[r].g == e2.trigger_log[r].g;
    }
    const bool noise_differs = e1.mse != e2.mse;
    report(10, tb && ev && logs && noise_differs,
           fmt("time-based replay identical %s; event replay identical %s; trigger logs equal across seeds 7/8 %s "
               "(noise differs %s)",
               tb ? "yes" : "no", ev ? "yes" : "no", logs ? "yes" : "no", noise_differs ? "yes" : "no"));
}

}  // namespace

int main() {
    run_guarded(1, criterion1);
    run_guarded(2, criterion2);
    run_guarded(3, criterion3);
    run_guarded(4, criterion4);
    run_guarded(5, criterion5);
    run_guarded(6, criterion6);
    run_guarded(7, criterion7);
    run_guarded(8, criterion8);
    run_guarded(9, criterion9);
    run_guarded(10, criterion10);
    std::printf("%d of 10 criteria failed\n", failures);
    return failures;
}
