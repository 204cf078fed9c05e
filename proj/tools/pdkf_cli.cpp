#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pdkf/analysis.hpp"
#include "pdkf/scenario_io.hpp"
#include "pdkf/sim.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

enum Exit { kOk = 0, kOther = 1, kInvalid = 2, kInfeasible = 3 };

// analysis finished but its preconditions do not hold
struct Infeasible : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Options {
    std::string scenario;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> trials;
    std::optional<int> L;
    std::string delta;
    std::optional<int> horizon;
    std::optional<int> kstar;
    std::string beta;
    std::optional<int> window;
};

std::vector<double> parse_list(const std::string& s, const char* what) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) {
                throw std::invalid_argument(item);
            }
        } catch (const std::exception&) {
            throw pdkf::ValidationError(std::string("--") + what + ": '" + item + "' is not a number");
        }
    }
    if (out.empty()) {
        throw pdkf::ValidationError(std::string("--") + what + " needs at least one value");
    }
    return out;
}

std::string hex64(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

class Run {
  public:
    Run(std::string command, const Options& opt, int argc, char** argv) : command_(std::move(command)), opt_(opt) {
        for (int i = 0; i < argc; ++i) {
            argv_.emplace_back(argv[i]);
        }
        std::string out = opt.out;
        if (out.empty()) {
            const char* env = std::getenv("PDKF_OUT_DIR");
            out = env != nullptr && *env != '\0' ? env : "pdkf_out";
        }
        dir_ = out;
    }

    pdkf::ScenarioConfig load(std::optional<pdkf::ScenarioConfig> builtin = std::nullopt) {
        pdkf::ScenarioConfig cfg;
        if (builtin && opt_.scenario.empty()) {
            cfg = *builtin;
        } else {
            if (opt_.scenario.empty()) {
                throw pdkf::ValidationError("a scenario file is required (positional or --scenario)");
            }
            cfg = load_file(opt_.scenario);
        }
        if (opt_.seed) {
            cfg.seed = *opt_.seed;
            overrides_["seed"] = *opt_.seed;
        }
        if (opt_.trials) {
            cfg.trials = *opt_.trials;
            overrides_["trials"] = *opt_.trials;
        }
        if (opt_.L) {
            cfg.L = *opt_.L;
            overrides_["L"] = *opt_.L;
        }
        if (opt_.horizon) {
            cfg.horizon = *opt_.horizon;
            overrides_["horizon"] = *opt_.horizon;
        }
        if (!opt_.delta.empty() && command_ != "rate-bound") {
            const auto d = parse_list(opt_.delta, "delta");
            pdkf::set_thresholds(cfg, d);
            overrides_["delta"] = d;
        }
        cfg.validate();
        return cfg;
    }

    std::optional<double> beta_override(std::size_t index) {
        if (opt_.beta.empty()) {
            return std::nullopt;
        }
        const auto b = parse_list(opt_.beta, "beta");
        overrides_["beta"] = b;
        for (double v : b) {
            if (!(v > 0.0 && v < 1.0)) {
                throw pdkf::ValidationError("--beta values must lie in (0, 1)");
            }
        }
        return index < b.size() ? b[index] : b.back();
    }

    std::ofstream open(const std::string& name) {
        fs::create_directories(dir_);
        std::ofstream f(dir_ / name);
        if (!f) {
            throw std::runtime_error("cannot write " + (dir_ / name).string());
        }
        return f;
    }

    void manifest(const pdkf::ScenarioConfig& cfg, const json& extra = json::object()) {
        const std::string resolved = pdkf::scenario_to_json(cfg);
        json m;
        m["manifest_version"] = 1;
        m["tool_version"] = kVersion;
        m["command"] = command_;
        m["argv"] = argv_;
        m["scenario_hash"] = hex64(pdkf::fnv1a64(resolved));
        m["seed"] = cfg.seed;
        m["overrides"] = overrides_;
        m["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                             std::to_string(EIGEN_MINOR_VERSION);
        m["scenario"] = json::parse(resolved);
        for (auto it = extra.begin(); it != extra.end(); ++it) {
            m[it.key()] = it.value();
        }
        open("manifest.json") << m.dump(2) << '\n';
    }

    [[nodiscard]] const fs::path& dir() const { return dir_; }
    [[nodiscard]] const Options& opt() const { return opt_; }
    json& overrides() { return overrides_; }

  private:
    // a manifest is accepted in place of a scenario: its resolved scenario is replayed
    static pdkf::ScenarioConfig load_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) {
            throw pdkf::ValidationError("cannot open scenario file '" + path + "'");
        }
        std::stringstream ss;
        ss << in.rdbuf();
        const std::string text = ss.str();
        const json j = json::parse(text, nullptr, false);
        if (!j.is_discarded() && j.is_object() && j.contains("manifest_version") && j.contains("scenario")) {
            return pdkf::parse_scenario(j.at("scenario").dump(), path + "#scenario");
        }
        return pdkf::parse_scenario(text, path);
    }

    std::string command_;
    Options opt_;
    std::vector<std::string> argv_;
    fs::path dir_;
    json overrides_ = json::object();
};

void write_run(Run& run, const pdkf::RunMetrics& m, const std::string& suffix = "") {
    {
        auto f = run.open("metrics" + suffix + ".csv");
        pdkf::write_metrics_csv(f, m);
    }
    if (!m.trigger_log.empty()) {
        auto f = run.open("triggers" + suffix + ".csv");
        pdkf::write_triggers_csv(f, m);
    }
}

void print_summary(const char* label, const pdkf::ScenarioConfig& cfg, const pdkf::RunMetrics& m) {
    const int T = static_cast<int>(m.mse.size()) - 1;
    double resid = 0.0;
    for (int k = 1; k <= T; ++k) {
        resid = std::max(resid, m.constraint_residual[k]);
    }
    std::printf("%-12s trials=%d  final mse=%.6g  final trace(P)=%.6g  max residual=%.3g", label, m.trials,
                m.mse[T], m.trace_p[T], resid);
    if (!m.trigger_log.empty()) {
        std::printf("  lambda=%.6f", m.lambda);
    }
    std::printf("\n");
    for (int c : cfg.checkpoints) {
        if (c >= 0 && c <= T) {
            std::printf("  k=%-4d mse=%.6g trace(P)=%.6g\n", c, m.mse[c], m.trace_p[c]);
        }
    }
}

int cmd_eco(Run& run) {
    const auto cfg = run.load();
    const int window = run.opt().window.value_or(cfg.model.n);
    const auto r = pdkf::eco_check(cfg.model, cfg.agents, window);
    std::printf("window N=%d\n", window);
    std::printf("without constraints: alpha=%.6g (%s)\n", r.alpha_unconstrained,
                r.observable_without_constraints ? "pass" : "fail");
    std::printf("with constraints:    alpha=%.6g (%s)\n", r.alpha, r.observable_with_constraints ? "pass" : "fail");
    run.manifest(cfg, {{"eco", {{"window", window},
                                {"alpha", r.alpha},
                                {"alpha_unconstrained", r.alpha_unconstrained},
                                {"observable_with_constraints", r.observable_with_constraints},
                                {"observable_without_constraints", r.observable_without_constraints}}}});
    if (!r.observable_with_constraints) {
        throw Infeasible("extended collective observability fails: the gramian with constraints is singular");
    }
    return kOk;
}

int cmd_run(Run& run, pdkf::Mode mode, std::optional<pdkf::ScenarioConfig> builtin = std::nullopt) {
    auto cfg = run.load(builtin);
    cfg.mode = mode;
    const auto m = pdkf::monte_carlo(cfg);
    write_run(run, m);
    print_summary(pdkf::mode_name(mode), cfg, m);
    run.manifest(cfg, {{"lambda", m.lambda}});
    return kOk;
}

int cmd_mc(Run& run) {
    const auto cfg = run.load();
    const auto m = pdkf::monte_carlo(cfg);
    write_run(run, m);
    print_summary(pdkf::mode_name(cfg.mode), cfg, m);
    run.manifest(cfg, {{"lambda", m.lambda}});
    return kOk;
}

int cmd_threshold(Run& run) {
    const auto cfg = run.load();
    const int kstar = run.opt().kstar.value_or(cfg.topo.N + cfg.model.n);
    double beta = 0.0;
    std::string source = "override";
    if (auto b = run.beta_override(0)) {
        beta = *b;
    } else {
        beta = pdkf::pilot_betas_time(cfg.model, cfg.agents, cfg.topo, cfg.L, cfg.horizon).beta;
        source = "time-based pilot";
    }
    const auto r = pdkf::threshold_bounds(cfg.model, cfg.agents, cfg.topo, beta, kstar);
    auto f = run.open("thresholds.csv");
    f << "agent,bound,M_bar_positive\n";
    std::printf("beta=%.6g (%s)  k*=%d\n", beta, source.c_str(), kstar);
    for (std::size_t i = 0; i < r.agent_bound.size(); ++i) {
        f << i << ',' << pdkf::format_double(r.agent_bound[i]) << ',' << (r.M_bar_positive[i] ? 1 : 0) << '\n';
        std::printf("  agent %zu: bound=%.6g%s\n", i, r.agent_bound[i], r.M_bar_positive[i] ? "" : "  (M_bar singular)");
    }
    std::printf("network uniform threshold bound: %.6g\n", r.network_bound);
    run.manifest(cfg, {{"threshold", {{"beta", beta}, {"kstar", kstar}, {"network_bound", r.network_bound}}}});
    for (bool ok : r.M_bar_positive) {
        if (!ok) {
            throw Infeasible("M_bar is not positive definite for some agent; no positive threshold is admissible");
        }
    }
    return kOk;
}

int cmd_rate(Run& run) {
    const auto cfg = run.load();
    std::vector<double> grid{0.3};
    if (!run.opt().delta.empty()) {
        grid = parse_list(run.opt().delta, "delta");
        run.overrides()["delta"] = grid;
    }
    std::optional<pdkf::BetaPair> betas;
    if (auto b = run.beta_override(0)) {
        betas = pdkf::BetaPair{*b, *run.beta_override(1)};
    }
    const auto sw = pdkf::rate_sweep(cfg.model, cfg.agents, cfg.topo, grid, cfg.horizon, betas);
    auto f = run.open("rate.csv");
    f << "delta,agent,T1,T2,side_condition,feasible,lambda0,lambda_asymptotic\n";
    std::printf("beta=%.6g beta_bar=%.6g T=%d\n", sw.betas.beta, sw.betas.beta_bar, cfg.horizon);
    bool any = false;
    json reports = json::array();
    for (const auto& r : sw.reports) {
        any = any || r.available;
        std::printf("delta=%-8g %s", r.delta, r.status.c_str());
        if (r.available) {
            std::printf("  lambda0=%.6f  asymptotic=%.6f", r.lambda0, r.lambda_asymptotic);
        }
        std::printf("\n");
        for (std::size_t i = 0; i < r.agents.size(); ++i) {
            const auto& a = r.agents[i];
            f << pdkf::format_double(r.delta) << ',' << i << ',' << (a.T1 ? std::to_string(*a.T1) : "") << ','
              << (a.T2 ? std::to_string(*a.T2) : "") << ',' << (a.side_condition ? 1 : 0) << ','
              << (a.feasible ? 1 : 0) << ',' << pdkf::format_double(r.lambda0) << ','
              << pdkf::format_double(r.lambda_asymptotic) << '\n';
        }
        reports.push_back({{"delta", r.delta}, {"available", r.available}, {"lambda0", r.lambda0}});
    }
    std::printf("lambda0 non-increasing over the grid: %s\n", sw.monotone ? "yes" : "no");
    run.manifest(cfg, {{"rate", {{"beta", sw.betas.beta}, {"beta_bar", sw.betas.beta_bar}, {"reports", reports}}}});
    if (!any) {
        throw Infeasible("no agent satisfies the rate-bound conditions for any threshold in the grid");
    }
    return kOk;
}

int cmd_case(Run& run, pdkf::ScenarioConfig builtin, const std::vector<double>& default_delta) {
    if (run.opt().delta.empty()) {
        pdkf::set_thresholds(builtin, default_delta);
    }
    auto cfg = run.load(builtin);
    cfg.mode = pdkf::Mode::TimeBased;
    const auto eco = pdkf::eco_check(cfg.model, cfg.agents, cfg.model.n);
    std::printf("%s: N=%d  ECO alpha without constraints=%.6g, with=%.6g\n", cfg.name.c_str(), cfg.topo.N,
                eco.alpha_unconstrained, eco.alpha);
    const auto tp = pdkf::run_time_based(cfg);
    const auto ckf = pdkf::ckf_baseline(cfg);
    const auto cons = pdkf::consensus_baseline(cfg);
    auto ev_cfg = cfg;
    ev_cfg.mode = pdkf::Mode::EventTriggered;
    const auto ev = pdkf::run_event(ev_cfg);
    write_run(run, tp, "_tpdkf");
    write_run(run, ckf, "_ckf");
    write_run(run, cons, "_consensus");
    write_run(run, ev, "_epdkf");
    print_summary("tpdkf", cfg, tp);
    print_summary("ckf", cfg, ckf);
    print_summary("consensus", cfg, cons);
    print_summary("epdkf", cfg, ev);
    run.manifest(cfg, {{"lambda_epdkf", ev.lambda}});
    return kOk;
}

void add_common(CLI::App* sub, Options& o, bool analysis) {
    sub->add_option("--scenario,scenario", o.scenario, "scenario file (JSON) or a previous manifest.json");
    sub->add_option("--out", o.out, "output directory (default: $PDKF_OUT_DIR or ./pdkf_out)");
    sub->add_option("--seed", o.seed, "master RNG seed");
    sub->add_option("--trials", o.trials, "Monte Carlo trials")->check(CLI::PositiveNumber);
    sub->add_option("--L", o.L, "fusion-projection steps per time step")->check(CLI::PositiveNumber);
    sub->add_option("--delta", o.delta, "thresholds: one uniform value or a comma list (per agent; a grid for rate-bound)");
    sub->add_option("--horizon", o.horizon, "time steps")->check(CLI::PositiveNumber);
    if (analysis) {
        sub->add_option("--kstar", o.kstar, "threshold-design horizon (default N + n)");
        sub->add_option("--beta", o.beta, "beta override (rate-bound: beta,beta_bar)");
        sub->add_option("--window", o.window, "observability window (default n)");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Projected distributed Kalman filtering: simulation and analysis"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    Options opt;

    struct Sub {
        const char* name;
        const char* help;
        bool analysis;
    };
    const std::vector<Sub> subs{
        {"eco-check", "observability gramian with and without constraints", true},
        {"run-tpdkf", "time-based filter run", false},
        {"run-epdkf", "event-triggered filter run", false},
        {"threshold-bound", "uniform triggering-threshold design bound", true},
        {"rate-bound", "communication-rate upper bound over a threshold grid", true},
        {"mc", "Monte Carlo run in the scenario's mode", false},
        {"case1", "built-in three-agent road scenario (filters and baselines)", false},
        {"case2", "built-in twenty-agent scenario (filters and baselines)", false},
    };
    std::vector<CLI::App*> handles;
    for (const auto& s : subs) {
        auto* sub = app.add_subcommand(s.name, s.help);
        add_common(sub, opt, s.analysis);
        handles.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kInvalid;
    }

    std::string command;
    for (auto* h : handles) {
        if (h->parsed()) {
            command = h->get_name();
        }
    }
    try {
        Run run(command, opt, argc, argv);
        if (command == "eco-check") {
            return cmd_eco(run);
        }
        if (command == "run-tpdkf") {
            return cmd_run(run, pdkf::Mode::TimeBased);
        }
        if (command == "run-epdkf") {
            return cmd_run(run, pdkf::Mode::EventTriggered);
        }
        if (command == "threshold-bound") {
            return cmd_threshold(run);
        }
        if (command == "rate-bound") {
            return cmd_rate(run);
        }
        if (command == "mc") {
            return cmd_mc(run);
        }
        if (command == "case1") {
            return cmd_case(run, pdkf::builtin_case1(), {0.3, 0.4, 0.8});
        }
        if (command == "case2") {
            return cmd_case(run, pdkf::builtin_case2(), {0.3});
        }
        std::fprintf(stderr, "unknown command\n");
        return kInvalid;
    } catch (const pdkf::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kInvalid;
    } catch (const Infeasible& e) {
        std::fprintf(stderr, "infeasible: %s\n", e.what());
        return kInfeasible;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "failure: %s\n", e.what());
        return kOther;
    }
}
