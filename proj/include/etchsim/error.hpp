#pragma once

#include <stdexcept>
#include <string>

namespace etchsim {

// Invalid user input: bad config fields, malformed documents, out-of-range
// parameters. The CLI maps this to exit code 1.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Failures while running: I/O errors, numerical breakdown, failed
// simulations. The CLI maps this to exit code 2.
class RuntimeError : public std::runtime_error {
public:
    explicit RuntimeError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace etchsim
