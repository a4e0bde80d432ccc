#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace powerlag::commands {

struct Options {
    std::string scenario_path;
    std::optional<std::uint64_t> seed; // --seed / POWERLAG_SEED override
    std::string out_dir;               // --out override
    int threads = -1;                  // --threads override, -1 = scenario
};

// Each command returns the process exit code:
// 0 success, 2 config error, 3 data error, 4 numerical failure.
int validate_config(const Options &opt, std::ostream &out, std::ostream &err);
int samplesize(const Options &opt, std::ostream &out, std::ostream &err);
int power_curve(const Options &opt, std::ostream &out, std::ostream &err);
int bias(const Options &opt, std::ostream &out, std::ostream &err);
int simulate(const Options &opt, std::ostream &out, std::ostream &err);

} // namespace powerlag::commands
