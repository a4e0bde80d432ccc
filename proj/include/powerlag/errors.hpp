#pragma once

#include <stdexcept>
#include <string>

namespace powerlag {

// CLI exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
    static constexpr int exit_code = 2;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
    static constexpr int exit_code = 3;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
    static constexpr int exit_code = 4;
};

} // namespace powerlag
