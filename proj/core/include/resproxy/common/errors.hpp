#pragma once

#include <stdexcept>
#include <string>

namespace resproxy {

/// Coarse failure classes. The CLI maps each one to its own exit code.
enum class ErrorCategory { config, data, solver, numeric, contract };

const char* to_string(ErrorCategory category) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    [[nodiscard]] ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(ErrorCategory::numeric, what) {}
};

/// Violated precondition on an API call (shape mismatch, id out of range, ...).
class ContractError : public Error {
public:
    explicit ContractError(const std::string& what) : Error(ErrorCategory::contract, what) {}
};

/// Newton solve did not converge after all time-step chops.
class SolverError : public Error {
public:
    SolverError(const std::string& what, double last_residual, int step = -1)
        : Error(ErrorCategory::solver, what), last_residual_(last_residual), step_(step) {}

    [[nodiscard]] double last_residual() const noexcept { return last_residual_; }
    /// Simulation step at which the failure happened, -1 when unknown.
    [[nodiscard]] int step() const noexcept { return step_; }

private:
    double last_residual_;
    int step_;
};

}  // namespace resproxy
