#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>

#include "rcamon/pipeline.hpp"
#include "rcamon/simgen.hpp"

namespace rcamon {

/// Flat `key = value` text. '#' starts a comment; blank lines are ignored.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(std::istream& in);
KeyValues read_key_values(const std::string& path);

struct RunConfig {
    MonitorConfig monitor;
    std::uint64_t seed = 1;
};

/// Every key must name a RunConfig field; unknown keys raise InvalidConfig.
RunConfig parse_run_config(const KeyValues& kv);
RunConfig read_run_config(const std::string& path);
void write_run_config(std::ostream& out, const RunConfig& config);

/// Scenario keys: m1, m2, m3, n_trends, noise_std, trend_std, ar_coef,
/// setpoint_spread, seed, durations (comma list, one per mode),
/// mode.<k>.loading (row-major), mode.<k>.setpoints, and
/// fault.<k>.{onset,variable,kind,magnitude} with kind bias|drift.
ScenarioConfig parse_scenario(const KeyValues& kv);
ScenarioConfig read_scenario(const std::string& path);
void write_scenario(std::ostream& out, const ScenarioConfig& config);

}  // namespace rcamon
