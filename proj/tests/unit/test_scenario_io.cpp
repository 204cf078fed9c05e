#include <sstream>

#include <doctest.h>

#include "pdkf/scenario_io.hpp"
#include "support.hpp"

using namespace pdkf;

namespace {

const char* kMinimal = R"({
  "n": 1,
  "A": 1.0,
  "Q": 1.0,
  "P0": 1.0,
  "beta1": 1.1,
  "beta2": 0.9,
  "agents": [
    {"H": 1.0, "R": 2.0},
    {"H": 0.0, "R": 1.0, "delta": 0.4}
  ],
  "weights": {"mode": "metropolis", "edges": [[0, 1]]},
  "sim": {"horizon": 20, "trials": 2, "seed": 3, "mode": "event-triggered"}
})";

}  // namespace

TEST_CASE("FNV-1a reference values") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("format_double round-trips") {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17}) {
        CHECK(std::stod(format_double(v)) == v);
    }
}

TEST_CASE("minimal scenario parses with defaults") {
    const auto cfg = parse_scenario(kMinimal, "mini");
    CHECK(cfg.model.n == 1);
    CHECK(cfg.agents.size() == 2);
    CHECK(cfg.agents[1].delta == 0.4);
    CHECK(cfg.agents[0].epsilon == doctest::Approx(0.01));
    CHECK(cfg.topo.weights(0, 1) == doctest::Approx(0.5));
    CHECK(cfg.horizon == 20);
    CHECK(cfg.mode == Mode::EventTriggered);
    CHECK(cfg.seed == 3);
}

TEST_CASE("resolved JSON round-trips to the same configuration") {
    const auto cfg = parse_scenario(kMinimal, "mini");
    const std::string once = scenario_to_json(cfg);
    const auto back = parse_scenario(once, "roundtrip");
    CHECK(scenario_to_json(back) == once);
    CHECK((back.topo.weights - cfg.topo.weights).norm() == 0.0);
}

TEST_CASE("matrix forms") {
    const std::string text = R"({"n": 2, "A": [[1, 0.1], [0, 1]], "Q": {"diag": [4, 1]}, "P0": [[1, 0], [0, 1]],
      "beta1": 1.2, "beta2": 0.8,
      "agents": [{"H": [1, 0], "R": 90, "D": [1, -1], "d": [0]}],
      "weights": {"mode": "explicit", "matrix": [[1]]}})";
    const auto cfg = parse_scenario(text);
    CHECK(cfg.model.Q.front()(1, 1) == 1.0);
    CHECK(cfg.model.A.front()(0, 1) == 0.1);
    CHECK(cfg.agents[0].D(0, 1) == -1.0);
}

TEST_CASE("syntax errors report line and column") {
    try {
        (void)parse_scenario("{\n  \"n\": 1,\n  oops\n}", "broken.json");
        FAIL("expected failure");
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("broken.json") != std::string::npos);
        CHECK(msg.find("line 3") != std::string::npos);
    }
}

TEST_CASE("schema errors name the field") {
    std::string text = kMinimal;
    text.replace(text.find("\"R\": 2.0"), 8, "\"R\": -2.0");
    try {
        (void)parse_scenario(text, "src");
        FAIL("expected failure");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("agents[0].R") != std::string::npos);
    }
    CHECK_THROWS_AS((void)parse_scenario(R"({"n": 1})"), ValidationError);
    CHECK_THROWS_AS((void)parse_scenario(R"({"n": "two"})"), ValidationError);
}

TEST_CASE("metrics CSV layout") {
    auto cfg = parse_scenario(kMinimal, "mini");
    cfg.horizon = 3;
    const auto m = monte_carlo(cfg);
    std::ostringstream os;
    write_metrics_csv(os, m);
    std::istringstream is(os.str());
    std::string header;
    std::getline(is, header);
    CHECK(header == "step,mse,trace_p,lambda_running,max_constraint_residual,mean_error_norm");
    int rows = 0;
    for (std::string line; std::getline(is, line);) {
        ++rows;
    }
    CHECK(rows == 4);
    std::ostringstream ts;
    write_triggers_csv(ts, m);
    CHECK(ts.str().rfind("step,agent,g,fired", 0) == 0);
}
