#pragma once

#include "powerlag/types.hpp"

#include <string>
#include <utility>

namespace powerlag {

/// Reads a `unit,time,value` CSV into a dense panel. Missing (unit,time)
/// cells, duplicate keys, and non-numeric fields are hard errors reported
/// with their line number. Leading '#' lines are ignored.
ExposurePanel load_panel_csv(const std::string &path);

/// Reads a `unit,time,true_value,measured_value` CSV into an aligned
/// truth/measured panel pair.
std::pair<ExposurePanel, ExposurePanel> load_validation_csv(const std::string &path);

void write_panel_csv(const ExposurePanel &panel, const std::string &path);

} // namespace powerlag
