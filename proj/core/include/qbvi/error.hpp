#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qbvi {

enum class ErrorKind {
  NotSpd,
  NotPositive,
  Singular,
  NonFiniteLoglik,
  NonFiniteLogPost,
  InsufficientSamples,
  Domain,
  DimMismatch,
  TooShort,
  Config,
  Parse,
  Io,
};

std::string_view to_string(ErrorKind kind);

/// Base of every error thrown by the library. Callers that only care about the
/// category can switch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

template <ErrorKind K>
class TypedError : public Error {
 public:
  explicit TypedError(const std::string& what) : Error(K, what) {}
};

using NotSpdError = TypedError<ErrorKind::NotSpd>;
using NotPositiveError = TypedError<ErrorKind::NotPositive>;
using SingularError = TypedError<ErrorKind::Singular>;
using NonFiniteLogPostError = TypedError<ErrorKind::NonFiniteLogPost>;
using InsufficientSamplesError = TypedError<ErrorKind::InsufficientSamples>;
using DomainError = TypedError<ErrorKind::Domain>;
using DimMismatchError = TypedError<ErrorKind::DimMismatch>;
using TooShortError = TypedError<ErrorKind::TooShort>;
using ConfigError = TypedError<ErrorKind::Config>;
using IoError = TypedError<ErrorKind::Io>;

/// Carries the draw at which the log-likelihood stopped being finite.
class NonFiniteLoglikError : public Error {
 public:
  NonFiniteLoglikError(const std::string& what, std::vector<double> theta)
      : Error(ErrorKind::NonFiniteLoglik, what), theta_(std::move(theta)) {}

  const std::vector<double>& theta() const noexcept { return theta_; }

 private:
  std::vector<double> theta_;
};

/// Parse failure with a 1-based row/column location.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t row, std::size_t col)
      : Error(ErrorKind::Parse, what), row_(row), col_(col) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t col() const noexcept { return col_; }

 private:
  std::size_t row_;
  std::size_t col_;
};

}  // namespace qbvi
