#pragma once

#include <stdexcept>
#include <string>

namespace nsqmc {

/// Invalid user-facing configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure at runtime (CLI exit code 3).
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Picard iteration exceeded its cap without meeting the tolerance.
class NonConvergence : public NumericalError {
public:
    NonConvergence(int iterations, double last_residual, int time_index,
                   const std::string& what)
        : NumericalError(what),
          iterations(iterations),
          last_residual(last_residual),
          time_index(time_index) {}

    int iterations;
    double last_residual;
    int time_index;
};

} // namespace nsqmc
