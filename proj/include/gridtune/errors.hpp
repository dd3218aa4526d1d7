#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gridtune {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Invalid network topology (self loop, duplicate line, disconnected graph, ...).
class ConstructionError : public Error {
  public:
    using Error::Error;
};

/// Evaluation outside the domain of a function (transfer function pole, d <= 0, ...).
class DomainError : public Error {
  public:
    using Error::Error;
};

/// Malformed numeric input (asymmetric matrix, empty grid, bad dimensions).
class InputError : public Error {
  public:
    using Error::Error;
};

/// Virtual inertia with nonzero measurement noise: the realization would
/// differentiate white noise and the H2 norm is unbounded.
class UnboundedNoiseError : public Error {
  public:
    using Error::Error;
};

/// Closed-form or modal route called with per-bus heterogeneous parameters.
class HomogeneityError : public Error {
  public:
    using Error::Error;
};

/// g(nu) has no finite minimizer (k_w == 0).
class UnboundedOptimumError : public Error {
  public:
    using Error::Error;
};

/// A matrix that must be Hurwitz is not. Carries the offending eigenvalue.
class StabilityError : public Error {
  public:
    StabilityError(const std::string& what, std::complex<double> eigenvalue)
        : Error(what), eigenvalue_(eigenvalue) {}
    explicit StabilityError(const std::string& what) : Error(what) {}

    std::complex<double> eigenvalue() const noexcept { return eigenvalue_; }

  private:
    std::complex<double> eigenvalue_{0.0, 0.0};
};

/// Nyquist locus passes (numerically) through the critical point -1.
class MarginalStabilityError : public Error {
  public:
    using Error::Error;
};

/// Syntax error in a configuration document.
class ParseError : public Error {
  public:
    ParseError(const std::string& what, std::size_t line, std::size_t column)
        : Error(what), line_(line), column_(column) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

  private:
    std::size_t line_;
    std::size_t column_;
};

struct Violation {
    std::string field;
    std::string message;
};

/// Semantic violations of the configuration schema. All violations found in
/// one pass are collected; what() names the first field.
class ValidationError : public Error {
  public:
    explicit ValidationError(std::vector<Violation> violations)
        : Error(summarize(violations)), violations_(std::move(violations)) {}

    const std::vector<Violation>& violations() const noexcept { return violations_; }
    const std::string& field() const { return violations_.front().field; }

  private:
    static std::string summarize(const std::vector<Violation>& v) {
        if (v.empty()) return "validation failed";
        std::string s = v.front().field + ": " + v.front().message;
        if (v.size() > 1) s += " (+" + std::to_string(v.size() - 1) + " more)";
        return s;
    }

    std::vector<Violation> violations_;
};

}  // namespace gridtune
