#pragma once

#include <stdexcept>
#include <string>

namespace msqg {

// Error categories aligned with the CLI exit codes:
//   ConfigError -> 2 (usage / configuration)
//   DataError   -> 3 (missing or malformed input data)
//   NumericError-> 4 (numeric failure: NaN/Inf, degenerate distributions)
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace msqg
