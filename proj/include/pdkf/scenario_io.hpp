#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>

#include "pdkf/sim.hpp"

namespace pdkf {

/// Parse a JSON scenario. Errors are ValidationError with the source name,
/// line/column for syntax problems, and the field path for schema problems.
[[nodiscard]] ScenarioConfig parse_scenario(const std::string& text, const std::string& source = "<string>");

[[nodiscard]] ScenarioConfig load_scenario(const std::string& path);

/// Fully resolved scenario as pretty JSON (parseable by parse_scenario).
[[nodiscard]] std::string scenario_to_json(const ScenarioConfig& cfg);

[[nodiscard]] std::uint64_t fnv1a64(std::string_view data);

/// %.17g
[[nodiscard]] std::string format_double(double v);

void write_metrics_csv(std::ostream& os, const RunMetrics& m);
void write_triggers_csv(std::ostream& os, const RunMetrics& m);

}  // namespace pdkf
