#pragma once

#include <stdexcept>
#include <string>

namespace hapfv {

// Invalid user input: bad config keys/values, inconsistent scenario, malformed files.
// The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// A time integration that cannot continue (dt underflow, non-finite state).
// The CLI maps this to exit code 3.
struct RunAbort : std::runtime_error {
    explicit RunAbort(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace hapfv
