#include "pdkf/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "pdkf/analysis.hpp"

namespace pdkf {

namespace {

// symmetric square root factor for sampling from possibly singular covariances
Mat sample_factor(const Mat& cov) {
    Eigen::SelfAdjointEigenSolver<Mat> es(linalg::symmetrize(cov));
    const Vec w = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * w.asDiagonal();
}

Vec draw(std::mt19937_64& rng, const Mat& factor) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Vec z(factor.cols());
    for (Eigen::Index r = 0; r < z.size(); ++r) {
        z(r) = nd(rng);
    }
    return factor * z;
}

struct Recorder {
    const ScenarioConfig& cfg;
    const Truth& truth;
    RunMetrics m;

    Recorder(const ScenarioConfig& c, const Truth& t, int agents) : cfg(c), truth(t) {
        const int T = cfg.horizon;
        m.trials = static_cast<int>(t.x.front().cols());
        m.agents = agents;
        m.mse.assign(T + 1, 0.0);
        m.trace_p.assign(T + 1, 0.0);
        m.lambda_running.assign(T + 1, 1.0);
        m.constraint_residual.assign(T + 1, 0.0);
        m.mean_error_norm.assign(T + 1, 0.0);
        m.P.assign(T + 1, {});
        m.error_moment.assign(T + 1, {});
        m.mean_error.assign(T + 1, {});
    }

    // agents_for_residual may be empty (baselines report no constraint residual)
    void record(int k, const std::vector<EstimateBatch>& est, const std::vector<AgentSpec>* agents_for_residual) {
        const Mat& x = truth.x[k];
        const double M = static_cast<double>(x.cols());
        const int N = static_cast<int>(est.size());
        Vec mean_all = Vec::Zero(x.rows());
        double mse = 0.0;
        double tr = 0.0;
        double resid = 0.0;
        for (int i = 0; i < N; ++i) {
            const Mat e = est[i].x - x;
            const Mat mom = M > 0 ? Mat(e * e.transpose() / M) : Mat::Zero(x.rows(), x.rows());
            const Vec me = M > 0 ? Vec(e.rowwise().mean()) : Vec::Zero(x.rows());
            mse += mom.trace();
            tr += est[i].P.trace();
            mean_all += me;
            m.P[k].push_back(est[i].P);
            m.error_moment[k].push_back(mom);
            m.mean_error[k].push_back(me);
            if (agents_for_residual != nullptr && (*agents_for_residual)[i].has_constraint() && M > 0) {
                const auto& a = (*agents_for_residual)[i];
                const Mat r = (a.D * est[i].x).colwise() - a.d;
                resid = std::max(resid, r.cwiseAbs().maxCoeff());
            }
        }
        m.mse[k] = mse / N;
        m.trace_p[k] = tr / N;
        m.mean_error_norm[k] = (mean_all / N).norm();
        m.constraint_residual[k] = resid;
    }
};

std::vector<EstimateBatch> initial_batches(const ScenarioConfig& cfg, int M) {
    std::vector<EstimateBatch> out;
    for (const auto& e : initial_estimates(cfg.model, cfg.agents)) {
        out.push_back({e.x.replicate(1, M), e.P});
    }
    return out;
}

RunMetrics run_time_based_impl(const ScenarioConfig& cfg, bool project_on) {
    cfg.validate();
    const Truth truth = generate_truth(cfg, cfg.trials, cfg.seed);
    Recorder rec(cfg, truth, cfg.topo.N);
    auto est = initial_batches(cfg, cfg.trials);
    rec.record(0, est, &cfg.agents);
    for (int k = 1; k <= cfg.horizon; ++k) {
        est = tpdkf_round(est, truth.y[k], cfg.model, cfg.agents, cfg.topo, k, cfg.L, project_on);
        rec.record(k, est, &cfg.agents);
    }
    rec.m.lambda = 1.0;
    rec.m.fire_counts.assign(cfg.topo.N, cfg.horizon);
    return rec.m;
}

}  // namespace

const char* mode_name(Mode m) { return m == Mode::TimeBased ? "time-based" : "event-triggered"; }

Mode parse_mode(const std::string& s) {
    if (s == "time-based" || s == "tpdkf" || s == "time") {
        return Mode::TimeBased;
    }
    if (s == "event-triggered" || s == "epdkf" || s == "event") {
        return Mode::EventTriggered;
    }
    throw ValidationError("unknown mode '" + s + "' (expected time-based or event-triggered)");
}

const Mat& ScenarioConfig::measurement_noise(int i) const {
    if (static_cast<std::size_t>(i) < R_sim.size() && R_sim[i].size() > 0) {
        return R_sim[i];
    }
    return agents.at(i).R;
}

void ScenarioConfig::validate() const {
    model.validate();
    topo.validate();
    if (static_cast<int>(agents.size()) != topo.N) {
        throw ValidationError("agent count does not match the topology size");
    }
    for (std::size_t i = 0; i < agents.size(); ++i) {
        try {
            agents[i].validate(model.n);
        } catch (const ValidationError& e) {
            throw ValidationError("agent " + std::to_string(i) + ": " + e.what());
        }
    }
    if (horizon < 1) {
        throw ValidationError("horizon must be at least 1");
    }
    if (trials < 1) {
        throw ValidationError("trials must be at least 1");
    }
    if (mode == Mode::TimeBased && L < 1) {
        throw ValidationError("L must be at least 1 in time-based mode");
    }
    if (mode == Mode::EventTriggered && !model.time_invariant()) {
        throw ValidationError("event-triggered mode needs a time-invariant model");
    }
    if (Q_sim.size() > 0 && (Q_sim.rows() != model.n || Q_sim.cols() != model.n)) {
        throw ValidationError("simulation Q must be n x n");
    }
    (void)build_global_constraint(agents, model.n, model.varpi);
}

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace

// master is mixed first so (master, trial + 1) and (master + 1, trial) differ
std::uint64_t trial_seed(std::uint64_t master, int trial) {
    return splitmix64(splitmix64(master) + static_cast<std::uint64_t>(trial));
}

Truth generate_truth(const ScenarioConfig& cfg, int trials, std::uint64_t seed) {
    const int n = cfg.model.n;
    const int N = static_cast<int>(cfg.agents.size());
    const int T = cfg.horizon;
    const GlobalConstraint gc = build_global_constraint(cfg.agents, n);
    const Mat Pi = tangent_projector(gc, n);
    const Mat Lx0 = sample_factor(cfg.model.x0_cov);
    const Mat Lw = sample_factor(cfg.process_noise());
    std::vector<Mat> Lv(N);
    for (int i = 0; i < N; ++i) {
        Lv[i] = sample_factor(cfg.measurement_noise(i));
    }
    // component of x0 that puts it onto {D x = d}
    Mat G = Mat::Zero(n, gc.rows());
    if (gc.rows() > 0) {
        G = gc.D.transpose() * linalg::spd_inverse(gc.D * gc.D.transpose(), "D D^T");
    }

    Truth tr;
    tr.x.assign(T + 1, Mat(n, trials));
    tr.y.assign(T + 1, std::vector<Mat>(N));
    for (int k = 1; k <= T; ++k) {
        for (int i = 0; i < N; ++i) {
            tr.y[k][i].resize(cfg.agents[i].H.rows(), trials);
        }
    }
    for (int j = 0; j < trials; ++j) {
        std::mt19937_64 rng(trial_seed(seed, j));
        Vec x = cfg.model.x0_mean + draw(rng, Lx0);
        if (gc.rows() > 0) {
            x -= G * (gc.D * x - gc.d);
        }
        tr.x[0].col(j) = x;
        for (int k = 1; k <= T; ++k) {
            x = cfg.model.A_at(k - 1) * x + Pi * draw(rng, Lw);
            tr.x[k].col(j) = x;
            for (int i = 0; i < N; ++i) {
                tr.y[k][i].col(j) = cfg.agents[i].H * x + draw(rng, Lv[i]);
            }
        }
    }
    if (gc.rows() > 0) {
        for (int k = 0; k <= T; ++k) {
            const Mat r = (gc.D * tr.x[k]).colwise() - gc.d;
            const double scale = std::max(1.0, tr.x[k].cwiseAbs().maxCoeff());
            if (r.size() > 0 && r.cwiseAbs().maxCoeff() > 1e-9 * scale) {
                std::ostringstream os;
                os << "system dynamics do not preserve the global constraint (residual "
                   << r.cwiseAbs().maxCoeff() << " at step " << k << ")";
                throw NumericalError(os.str());
            }
        }
    }
    return tr;
}

RunMetrics run_time_based(const ScenarioConfig& cfg) { return run_time_based_impl(cfg, true); }

RunMetrics consensus_baseline(const ScenarioConfig& cfg) { return run_time_based_impl(cfg, false); }

RunMetrics run_event(const ScenarioConfig& cfg) {
    cfg.validate();
    const Truth truth = generate_truth(cfg, cfg.trials, cfg.seed);
    const int N = cfg.topo.N;
    Recorder rec(cfg, truth, N);
    auto est = initial_batches(cfg, cfg.trials);
    std::vector<BasicTriggerState<Mat>> trig;
    for (int i = 0; i < N; ++i) {
        trig.push_back(BasicTriggerState<Mat>::initial(est[i], cfg.agents[i].delta));
    }
    rec.record(0, est, &cfg.agents);
    std::vector<int> fires(N, 0);
    for (int k = 1; k <= cfg.horizon; ++k) {
        auto round = epdkf_round(est, trig, truth.y[k], cfg.model, cfg.agents, cfg.topo, k);
        est = std::move(round.states);
        for (const auto& r : round.records) {
            fires[r.agent] += r.fired ? 1 : 0;
            rec.m.trigger_log.push_back(r);
        }
        rec.m.lambda_running[k] = communication_rate(fires, cfg.topo.out_degree, k);
        rec.record(k, est, &cfg.agents);
    }
    rec.m.fire_counts = fires;
    rec.m.lambda = rec.m.lambda_running[cfg.horizon];
    return rec.m;
}

RunMetrics monte_carlo(const ScenarioConfig& cfg) {
    return cfg.mode == Mode::TimeBased ? run_time_based(cfg) : run_event(cfg);
}

RunMetrics ckf_baseline(const ScenarioConfig& cfg) {
    cfg.validate();
    const Truth truth = generate_truth(cfg, cfg.trials, cfg.seed);
    const int N = cfg.topo.N;
    const int n = cfg.model.n;
    std::vector<int> used;
    Eigen::Index m = 0;
    for (int i = 0; i < N; ++i) {
        if (cfg.agents[i].has_measurement()) {
            used.push_back(i);
            m += cfg.agents[i].H.rows();
        }
    }
    Mat H = Mat::Zero(m, n);
    Mat R = Mat::Zero(m, m);
    Eigen::Index off = 0;
    for (int i : used) {
        const auto mi = cfg.agents[i].H.rows();
        H.middleRows(off, mi) = cfg.agents[i].H;
        R.block(off, off, mi, mi) = cfg.agents[i].R;
        off += mi;
    }
    Recorder rec(cfg, truth, 1);
    const auto init = initial_estimates(cfg.model, cfg.agents).front();
    std::vector<EstimateBatch> est{{init.x.replicate(1, cfg.trials), init.P}};
    rec.record(0, est, nullptr);
    for (int k = 1; k <= cfg.horizon; ++k) {
        est[0] = predict(est[0], cfg.model.A_at(k - 1), cfg.model.Q_at(k - 1));
        if (m > 0) {
            Mat y(m, cfg.trials);
            off = 0;
            for (int i : used) {
                const auto mi = cfg.agents[i].H.rows();
                y.middleRows(off, mi) = truth.y[k][i];
                off += mi;
            }
            est[0] = measurement_update(est[0], y, H, R);
        }
        rec.record(k, est, nullptr);
    }
    rec.m.fire_counts.assign(1, cfg.horizon);
    return rec.m;
}

Mat vehicle_matrix(double ts) {
    Mat A = Mat::Identity(4, 4);
    A(0, 2) = ts;
    A(1, 3) = ts;
    return A;
}

Mat road_constraint(double theta) {
    const double t = std::tan(theta);
    Mat D(2, 4);
    D << 1.0, -t, 0.0, 0.0, 0.0, 0.0, 1.0, -t;
    return D;
}

namespace {

SystemModel vehicle_system() {
    SystemModel sm;
    sm.n = 4;
    const Mat A = vehicle_matrix(0.1);
    sm.A = {A};
    sm.Q = {Vec((Vec(4) << 4.0, 4.0, 1.0, 1.0).finished()).asDiagonal()};
    sm.x0_mean = Vec::Zero(4);
    const double t = std::tan(std::numbers::pi / 3.0);
    sm.x0_cov = Vec((Vec(4) << 100.0, 100.0, t * t, 1.0).finished()).asDiagonal();
    sm.P0 = Vec((Vec(4) << 100.0, 100.0, 4.0, 4.0).finished()).asDiagonal();
    Eigen::JacobiSVD<Mat> svd(A);
    const auto s = svd.singularValues();
    // declared with a little slack around the actual spectrum
    sm.beta1 = 1.01 * s(0) * s(0);
    sm.beta2 = 0.99 * s(3) * s(3);
    sm.varpi = 0.5;
    return sm;
}

AgentSpec vehicle_agent(const Mat& H, bool road) {
    AgentSpec a;
    a.H = H;
    a.R = Mat::Constant(1, 1, 90.0);
    if (road) {
        a.D = road_constraint(std::numbers::pi / 3.0);
        a.d = Vec::Zero(2);
    } else {
        a.D = Mat::Zero(1, 4);
        a.d = Vec::Zero(1);
    }
    a.epsilon = 0.01;
    a.x0 = Vec::Zero(4);
    a.P0 = Vec((Vec(4) << 100.0, 100.0, 4.0, 4.0).finished()).asDiagonal();
    return a;
}

Mat row4(double a, double b, double c, double d) {
    Mat h(1, 4);
    h << a, b, c, d;
    return h;
}

}  // namespace

ScenarioConfig builtin_case1() {
    ScenarioConfig cfg;
    cfg.name = "case1";
    cfg.model = vehicle_system();
    cfg.agents = {vehicle_agent(row4(1, 0, 0, 0), true), vehicle_agent(row4(0, 0, 0, 0), false),
                  vehicle_agent(row4(1, 0, 0, 0), true)};
    cfg.topo = metropolis_weights(3, {{0, 1}, {1, 2}});
    cfg.horizon = 250;
    cfg.L = 1;
    cfg.trials = 1;
    cfg.seed = 1;
    return cfg;
}

ScenarioConfig builtin_case2(std::uint64_t graph_seed) {
    constexpr int N = 20;
    const std::vector<Mat> h_types{row4(1, 0, 0, 0), row4(0, 0.3, 0, 0), row4(0, 1, 0, 0)};
    for (std::uint64_t attempt = 0;; ++attempt) {
        std::mt19937_64 rng(trial_seed(graph_seed, static_cast<int>(attempt)));
        std::uniform_int_distribution<int> pick3(0, 2);
        std::uniform_int_distribution<int> pick2(0, 1);
        std::uniform_real_distribution<double> unit(0.0, 1.0);

        // random spanning tree plus sparse extra edges
        std::vector<std::pair<int, int>> edges;
        for (int v = 1; v < N; ++v) {
            std::uniform_int_distribution<int> parent(0, v - 1);
            edges.emplace_back(parent(rng), v);
        }
        for (int a = 0; a < N; ++a) {
            for (int b = a + 1; b < N; ++b) {
                const bool exists = std::any_of(edges.begin(), edges.end(), [&](const auto& e) {
                    return (e.first == a && e.second == b) || (e.first == b && e.second == a);
                });
                if (!exists && unit(rng) < 0.08) {
                    edges.emplace_back(a, b);
                }
            }
        }

        ScenarioConfig cfg;
        cfg.name = "case2";
        cfg.model = vehicle_system();
        for (int i = 0; i < N; ++i) {
            cfg.agents.push_back(vehicle_agent(h_types[pick3(rng)], pick2(rng) == 0));
        }
        cfg.topo = metropolis_weights(N, edges);
        cfg.horizon = 250;
        cfg.L = 1;
        // the stacked measurements alone must be collectively observable
        std::vector<AgentSpec> unconstrained = cfg.agents;
        for (auto& a : unconstrained) {
            a.D = Mat::Zero(1, 4);
            a.d = Vec::Zero(1);
        }
        if (eco_check(cfg.model, unconstrained, cfg.model.n).observable_without_constraints) {
            return cfg;
        }
    }
}

void set_thresholds(ScenarioConfig& cfg, const std::vector<double>& delta) {
    if (delta.size() == 1) {
        for (auto& a : cfg.agents) {
            a.delta = delta.front();
        }
        return;
    }
    if (delta.size() != cfg.agents.size()) {
        throw ValidationError("expected one threshold or one per agent (" + std::to_string(cfg.agents.size()) +
                              "), got " + std::to_string(delta.size()));
    }
    for (std::size_t i = 0; i < delta.size(); ++i) {
        if (!(delta[i] >= 0.0)) {
            throw ValidationError("thresholds must be nonnegative");
        }
        cfg.agents[i].delta = delta[i];
    }
}

}  // namespace pdkf
