#pragma once

#include "powerlag/types.hpp"

#include <cstdint>
#include <string>

namespace powerlag {

/// Parses the sectioned key=value scenario format. Unknown sections or keys
/// are errors (no silent typos); all numeric parsing is locale-independent.
/// The parsed config is not yet normalized; run validate_scenario next.
ScenarioConfig parse_scenario(const std::string &text, const std::string &origin = "scenario");

ScenarioConfig load_scenario_file(const std::string &path);

/// Emits a config back as scenario text; parse(scenario_to_text(cfg)) is the
/// identity on every field.
std::string scenario_to_text(const ScenarioConfig &cfg);

/// FNV-1a 64-bit over the raw scenario bytes; stamped into every output CSV
/// so results can be traced back to the exact configuration.
std::uint64_t scenario_hash(const std::string &text);

std::string read_text_file(const std::string &path);

} // namespace powerlag
