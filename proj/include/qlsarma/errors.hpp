#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace qlsarma {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Kernel extras (or any model constant) outside their admissible domain.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Argument outside the support of a function (e.g. y <= 0 for a density).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Mismatched vector/matrix dimensions.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Malformed user input: files, configs, missing columns.
class InputError : public Error {
public:
    using Error::Error;
};

/// Non-finite intermediate values, quadrature or root-finding failure.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& what, std::optional<std::size_t> t = std::nullopt)
        : Error(t ? what + " (at t=" + std::to_string(*t + 1) + ")" : what), t_(t) {}

    /// Zero-based time index of the first failure, when the error is tied to one.
    [[nodiscard]] std::optional<std::size_t> time_index() const noexcept { return t_; }

private:
    std::optional<std::size_t> t_;
};

/// Rank-deficient design matrix.
class CollinearityError : public InputError {
public:
    using InputError::InputError;
};

/// Every optimizer start failed.
class ConvergenceError : public NumericError {
public:
    using NumericError::NumericError;
};

/// The negative Hessian is not positive definite.
class SingularInformationError : public NumericError {
public:
    using NumericError::NumericError;
};

}  // namespace qlsarma
