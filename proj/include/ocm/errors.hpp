#pragma once

#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>
#include <utility>

namespace ocm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Invalid argument or index passed to an operation.
class ArgumentError : public Error {
  public:
    using Error::Error;
};

/// A model or configuration document failed validation. `path()` names the
/// offending key, e.g. `transition[1]`.
class ValidationError : public Error {
  public:
    ValidationError(std::string path, const std::string& what)
        : Error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}

    const std::string& path() const noexcept { return path_; }

  private:
    std::string path_;
};

/// Floating point accuracy could not be guaranteed (e.g. matrix exponential).
class NumericError : public Error {
  public:
    using Error::Error;
};

/// Singular or otherwise failed linear solve.
class SolverError : public Error {
  public:
    using Error::Error;
};

/// Newton iteration did not reach the requested tolerance.
class ConvergenceError : public Error {
  public:
    ConvergenceError(const std::string& what, double last_residual)
        : Error(what), last_residual_(last_residual) {}

    double last_residual() const noexcept { return last_residual_; }

  private:
    double last_residual_;
};

/// A computation would exceed a configured memory cap.
class ResourceError : public Error {
  public:
    ResourceError(const std::string& what, std::size_t estimated_bytes)
        : Error(what), estimated_bytes_(estimated_bytes) {}

    std::size_t estimated_bytes() const noexcept { return estimated_bytes_; }

  private:
    std::size_t estimated_bytes_;
};

/// An observation has zero likelihood under every parameter with positive weight.
class DegenerateObservationError : public Error {
  public:
    using Error::Error;
};

using WarningHandler = std::function<void(const std::string&)>;

namespace detail {
inline WarningHandler& warning_handler() {
    static WarningHandler handler = [](const std::string& msg) {
        std::clog << "ocm warning: " << msg << '\n';
    };
    return handler;
}
} // namespace detail

/// Replaces the process-wide warning sink; returns the previous one.
inline WarningHandler set_warning_handler(WarningHandler handler) {
    auto previous = std::move(detail::warning_handler());
    detail::warning_handler() = std::move(handler);
    return previous;
}

inline void warn(const std::string& msg) {
    if (detail::warning_handler())
        detail::warning_handler()(msg);
}

} // namespace ocm
