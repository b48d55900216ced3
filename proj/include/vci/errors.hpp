#pragma once

#include <stdexcept>
#include <string>

namespace vci {

// Bad parameters, bad config files, bad CLI usage. CLI maps this to exit code 2.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// Numeric trouble at runtime: negative radicands, non-PSD covariances,
// degenerate inputs. CLI maps this to exit code 3.
struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed tensor files. CLI maps this to exit code 3.
struct format_error : std::runtime_error {
    explicit format_error(const std::string& what) : std::runtime_error(what) {}
};

// Scripted test fixtures queried outside their tape.
struct fixture_error : std::logic_error {
    explicit fixture_error(const std::string& what) : std::logic_error(what) {}
};

} // namespace vci
