#pragma once

#include <stdexcept>
#include <string>

namespace adaem {

// Malformed input data (CSV rows, config lines, model files). The message
// carries the file/line context so callers can just rethrow or print it.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Bad configuration value (out of range, unknown key, inconsistent pair).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Raised by callers that require a feasible plan when the planner could not
// produce one. The planner itself reports infeasibility through its result
// struct instead of throwing, so simulations can keep running degraded.
class InfeasibleError : public std::runtime_error {
public:
    explicit InfeasibleError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace adaem
