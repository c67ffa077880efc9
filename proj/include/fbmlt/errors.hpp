#pragma once

#include <stdexcept>
#include <string>

namespace fbmlt {

/// Invalid argument or precondition violation (bad H, negative time, ...).
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A kernel asked for a derivative order it does not provide.
class CapabilityError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed experiment config, path file or kernel reference.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Request would exceed the memory/time budget.
class ResourceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Linear algebra or consistency failure (non-PSD embedding, singular matrix, ...).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Quadrature did not reach its tolerance within budget.
class AccuracyError : public NumericalError {
public:
    AccuracyError(const std::string& what, double estimate, double error_bound)
        : NumericalError(what), estimate_(estimate), error_bound_(error_bound) {}

    double estimate() const noexcept { return estimate_; }
    double error_bound() const noexcept { return error_bound_; }

private:
    double estimate_;
    double error_bound_;
};

/// Integral requested for a kernel whose decay class makes it diverge.
class IntegrabilityError : public DomainError {
public:
    using DomainError::DomainError;
};

/// Process exit code for an exception: 1 for domain/config problems, 2 for numerical failures.
int exit_code_for(const std::exception& e) noexcept;

}  // namespace fbmlt
