#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ebtrend {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rank-deficient or otherwise unusable design / contrast.
class DesignError : public Error {
 public:
  using Error::Error;
};

/// Malformed numerical input (NaN p-values, empty likelihood rows, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

class BinningError : public Error {
 public:
  using Error::Error;
};

/// A method was requested for data it is not defined on.
class ApplicabilityError : public Error {
 public:
  using Error::Error;
};

class QuadratureError : public Error {
 public:
  QuadratureError(const std::string& what, double achieved_error);
  double achieved_error() const noexcept { return achieved_error_; }

 private:
  double achieved_error_;
};

/// File or argument parse failure. Line and column are 1-based; 0 means unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0, std::size_t column = 0);
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }
  /// Message without the location prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string detail_;
  std::size_t line_;
  std::size_t column_;
};

}  // namespace ebtrend
