#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pdkf/event.hpp"
#include "pdkf/filter.hpp"
#include "pdkf/model.hpp"

namespace pdkf {

enum class Mode { TimeBased, EventTriggered };

[[nodiscard]] const char* mode_name(Mode m);
[[nodiscard]] Mode parse_mode(const std::string& s);

struct ScenarioConfig {
    std::string name = "scenario";
    SystemModel model;
    std::vector<AgentSpec> agents;
    Topology topo;
    int horizon = 250;
    int L = 1;
    Mode mode = Mode::TimeBased;
    int trials = 1;
    std::uint64_t seed = 1;
    // covariances used to draw noise; empty means "same as the bound"
    Mat Q_sim;
    std::vector<Mat> R_sim;
    std::vector<int> checkpoints{50, 150, 250};

    [[nodiscard]] const Mat& process_noise() const { return Q_sim.size() > 0 ? Q_sim : model.Q.front(); }
    [[nodiscard]] const Mat& measurement_noise(int i) const;

    void validate() const;
};

/// splitmix64(master + trial): independent, reproducible per-trial streams.
[[nodiscard]] std::uint64_t trial_seed(std::uint64_t master, int trial);

/// x[k] is n x M (k = 0..T); y[k][i] is m_i x M (y[0] is empty).
struct Truth {
    std::vector<Mat> x;
    std::vector<std::vector<Mat>> y;
};

/// Draws x0 (projected onto the global constraint), process noise projected
/// onto the constraint tangent space, and measurements. Each trial column
/// consumes its own stream in the order x0, then per step w_k, v_{k,1..N}.
[[nodiscard]] Truth generate_truth(const ScenarioConfig& cfg, int trials, std::uint64_t seed);

struct RunMetrics {
    int trials = 0;
    int agents = 0;
    std::vector<double> mse;                  // k = 0..T
    std::vector<double> trace_p;              // average trace over agents
    std::vector<double> lambda_running;       // communication rate over steps 1..k
    std::vector<double> constraint_residual;  // max_i |D_i x_i - d_i|_inf over all trials
    std::vector<double> mean_error_norm;      // || average error over agents and trials ||_2
    std::vector<TriggerRecord> trigger_log;   // event mode: one record per (k >= 1, agent)
    std::vector<int> fire_counts;
    double lambda = 1.0;
    std::vector<std::vector<Mat>> P;             // [k][i]
    std::vector<std::vector<Mat>> error_moment;  // [k][i] (1/M) sum e e^T
    std::vector<std::vector<Vec>> mean_error;    // [k][i]
};

[[nodiscard]] RunMetrics run_time_based(const ScenarioConfig& cfg);
[[nodiscard]] RunMetrics run_event(const ScenarioConfig& cfg);

/// Dispatches on cfg.mode with cfg.trials realizations.
[[nodiscard]] RunMetrics monte_carlo(const ScenarioConfig& cfg);

/// Centralized Kalman filter on the stacked measurements, no constraints.
/// Reported as a single "agent".
[[nodiscard]] RunMetrics ckf_baseline(const ScenarioConfig& cfg);

/// Time-based pipeline with every projection disabled (pure CI consensus).
[[nodiscard]] RunMetrics consensus_baseline(const ScenarioConfig& cfg);

/// Land-vehicle model: position/velocity in two axes with sampling period ts.
[[nodiscard]] Mat vehicle_matrix(double ts);

/// Road constraint for a heading of theta radians.
[[nodiscard]] Mat road_constraint(double theta);

/// Three-agent path scenario: ends observe position with R = 90 and know the road,
/// the middle agent has neither.
[[nodiscard]] ScenarioConfig builtin_case1();

/// Twenty agents on a seeded random connected graph with observation types drawn uniformly.
[[nodiscard]] ScenarioConfig builtin_case2(std::uint64_t graph_seed = 2024);

/// One value sets a uniform threshold, N values set them per agent.
void set_thresholds(ScenarioConfig& cfg, const std::vector<double>& delta);

}  // namespace pdkf
