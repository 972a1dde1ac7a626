#pragma once

#include <stdexcept>
#include <string>

namespace rbg {

/// Invalid model or CLI configuration (unknown baseline, bad parameter set, ...).
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// An iterative numerical procedure failed to reach its tolerance.
/// Carries the last estimate and an error bound so callers can decide
/// whether the partial result is still usable.
class non_convergence_error : public std::runtime_error {
public:
    non_convergence_error(const std::string& msg, double estimate, double bound)
        : std::runtime_error(msg), estimate_(estimate), bound_(bound) {}

    double estimate() const noexcept { return estimate_; }
    double error_bound() const noexcept { return bound_; }

private:
    double estimate_;
    double bound_;
};

/// The interaction matrix defines a non-normalizable joint density.
class non_integrable_error : public std::runtime_error {
public:
    explicit non_integrable_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A conditional distribution does not exist at the requested point
/// (its shape function is non-positive there).
class conditional_nonexistence_error : public std::runtime_error {
public:
    explicit conditional_nonexistence_error(const std::string& msg)
        : std::runtime_error(msg) {}
};

}  // namespace rbg
