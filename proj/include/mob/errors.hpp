#ifndef MOB_ERRORS_HPP
#define MOB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace mob {

// Violated precondition or invariant (shape mismatch, off-simplex weights, ...).
struct ContractError : std::runtime_error {
  explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training produced non-finite values and could not continue.
struct DivergenceError : std::runtime_error {
  explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

// File/format problems: truncation, checksum, version mismatch, unwritable path.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad or incomplete experiment configuration.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mob

#endif
