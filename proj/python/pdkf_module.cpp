#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pdkf/analysis.hpp"
#include "pdkf/event.hpp"
#include "pdkf/filter.hpp"
#include "pdkf/scenario_io.hpp"
#include "pdkf/sim.hpp"

namespace py = pybind11;
using namespace pdkf;

namespace {

py::dict metrics_dict(const RunMetrics& m) {
    py::dict d;
    d["trials"] = m.trials;
    d["agents"] = m.agents;
    d["mse"] = m.mse;
    d["trace_p"] = m.trace_p;
    d["lambda_running"] = m.lambda_running;
    d["constraint_residual"] = m.constraint_residual;
    d["mean_error_norm"] = m.mean_error_norm;
    d["fire_counts"] = m.fire_counts;
    d["lambda"] = m.lambda;
    d["P"] = m.P;
    py::list log;
    for (const auto& r : m.trigger_log) {
        log.append(py::make_tuple(r.step, r.agent, r.g, r.fired));
    }
    d["trigger_log"] = log;
    return d;
}

ConsistentEstimate pair_of(const Vec& x, const Mat& P) { return {x, P}; }

}  // namespace

PYBIND11_MODULE(_pdkf, m) {
    m.doc() = "Projected distributed Kalman filtering with equality constraints";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    py::enum_<Mode>(m, "Mode")
        .value("TimeBased", Mode::TimeBased)
        .value("EventTriggered", Mode::EventTriggered);

    py::class_<ScenarioConfig>(m, "Scenario")
        .def_readwrite("name", &ScenarioConfig::name)
        .def_readwrite("horizon", &ScenarioConfig::horizon)
        .def_readwrite("L", &ScenarioConfig::L)
        .def_readwrite("mode", &ScenarioConfig::mode)
        .def_readwrite("trials", &ScenarioConfig::trials)
        .def_readwrite("seed", &ScenarioConfig::seed)
        .def_property_readonly("N", [](const ScenarioConfig& c) { return c.topo.N; })
        .def_property_readonly("n", [](const ScenarioConfig& c) { return c.model.n; })
        .def_property_readonly("weights", [](const ScenarioConfig& c) { return c.topo.weights; })
        .def_property_readonly("thresholds",
                               [](const ScenarioConfig& c) {
                                   std::vector<double> d;
                                   for (const auto& a : c.agents) {
                                       d.push_back(a.delta);
                                   }
                                   return d;
                               })
        .def("set_thresholds", [](ScenarioConfig& c, const std::vector<double>& d) { set_thresholds(c, d); })
        .def("to_json", [](const ScenarioConfig& c) { return scenario_to_json(c); })
        .def("validate", &ScenarioConfig::validate);

    m.def("parse_scenario", &parse_scenario, py::arg("text"), py::arg("source") = "<string>");
    m.def("load_scenario", &load_scenario, py::arg("path"));
    m.def("case1", &builtin_case1);
    m.def("case2", &builtin_case2, py::arg("graph_seed") = 2024);

    m.def("run", [](const ScenarioConfig& c) { return metrics_dict(monte_carlo(c)); }, py::arg("scenario"),
          "Monte Carlo run in the scenario's mode; returns per-step metrics.");
    m.def("run_ckf", [](const ScenarioConfig& c) { return metrics_dict(ckf_baseline(c)); });
    m.def("run_consensus", [](const ScenarioConfig& c) { return metrics_dict(consensus_baseline(c)); });

    m.def(
        "eco_check",
        [](const ScenarioConfig& c, int window) {
            const auto r = eco_check(c.model, c.agents, window);
            py::dict d;
            d["alpha"] = r.alpha;
            d["alpha_unconstrained"] = r.alpha_unconstrained;
            d["observable_with_constraints"] = r.observable_with_constraints;
            d["observable_without_constraints"] = r.observable_without_constraints;
            d["gramian"] = r.gramian;
            return d;
        },
        py::arg("scenario"), py::arg("window"));

    m.def(
        "threshold_bound",
        [](const ScenarioConfig& c, double beta, int kstar) {
            const auto r = threshold_bounds(c.model, c.agents, c.topo, beta, kstar);
            py::dict d;
            d["beta"] = r.beta;
            d["kstar"] = r.kstar;
            d["agent_bound"] = r.agent_bound;
            d["network_bound"] = r.network_bound;
            return d;
        },
        py::arg("scenario"), py::arg("beta"), py::arg("kstar"));
    m.def(
        "pilot_beta",
        [](const ScenarioConfig& c, int T) {
            const auto b = pilot_betas_time(c.model, c.agents, c.topo, c.L, T);
            return py::make_tuple(b.beta, b.beta_bar);
        },
        py::arg("scenario"), py::arg("T"));

    m.def(
        "rate_bound",
        [](const ScenarioConfig& c, const std::vector<double>& deltas, int T) {
            const auto sw = rate_sweep(c.model, c.agents, c.topo, deltas, T);
            py::list out;
            for (const auto& r : sw.reports) {
                py::dict d;
                d["delta"] = r.delta;
                d["available"] = r.available;
                d["lambda0"] = r.lambda0;
                d["lambda_asymptotic"] = r.lambda_asymptotic;
                d["status"] = r.status;
                py::list runs;
                for (const auto& a : r.agents) {
                    runs.append(py::make_tuple(a.T1 ? py::cast(*a.T1) : py::none(),
                                               a.T2 ? py::cast(*a.T2) : py::none(), a.feasible));
                }
                d["agents"] = runs;
                out.append(d);
            }
            return py::make_tuple(out, sw.monotone);
        },
        py::arg("scenario"), py::arg("deltas"), py::arg("T"));

    // single-step building blocks on (x, P) pairs
    m.def("predict", [](const Vec& x, const Mat& P, const Mat& A, const Mat& Q) {
        const auto e = predict(pair_of(x, P), A, Q);
        return py::make_tuple(e.x, e.P);
    });
    m.def("measurement_update", [](const Vec& x, const Mat& P, const Vec& y, const Mat& H, const Mat& R) {
        const auto e = measurement_update(pair_of(x, P), y, H, R);
        return py::make_tuple(e.x, e.P);
    });
    m.def("ci_fuse", [](const std::vector<Vec>& xs, const std::vector<Mat>& Ps, const std::vector<double>& w) {
        if (xs.size() != Ps.size()) {
            throw ValidationError("ci_fuse: xs and Ps differ in length");
        }
        std::vector<ConsistentEstimate> pairs;
        for (std::size_t j = 0; j < xs.size(); ++j) {
            pairs.push_back(pair_of(xs[j], Ps[j]));
        }
        const auto e = ci_fuse(pairs, w);
        return py::make_tuple(e.x, e.P);
    });
    m.def(
        "project",
        [](const Vec& x, const Mat& P, const Mat& D, const Vec& d, double eps) {
            const auto e = project(pair_of(x, P), D, d, eps);
            return py::make_tuple(e.x, e.P);
        },
        py::arg("x"), py::arg("P"), py::arg("D"), py::arg("d"), py::arg("epsilon") = 0.01);
    m.def("trigger", [](const Mat& P_tilde, const Mat& P_pred, double delta) {
        const auto t = trigger_eval(P_tilde, P_pred, delta);
        return py::make_tuple(t.g, t.fired);
    });
    m.def("metropolis_weights", [](int N, const std::vector<std::pair<int, int>>& edges) {
        return metropolis_weights(N, edges).weights;
    });
    m.def("communication_rate", &communication_rate, py::arg("fire_counts"), py::arg("out_degree"),
          py::arg("steps"));
    m.def("eig_pos", &eig_pos);
}
