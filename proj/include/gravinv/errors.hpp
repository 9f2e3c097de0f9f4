#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gravinv {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A numerical argument lies outside the domain of a formula.
class DomainError : public Error {
public:
  using Error::Error;
};

/// Two peaks coincide, so the valley between them is undefined.
class DegeneratePairError : public DomainError {
public:
  using DomainError::DomainError;
};

/// Probe geometry contradicts the buried-sphere model.
class InconsistentProbeError : public DomainError {
public:
  using DomainError::DomainError;
};

/// No usable probe pair was found for a depth/mass estimate.
class EstimationError : public Error {
public:
  using Error::Error;
};

/// A configuration or input value is outside its valid range.
class ValidationError : public Error {
public:
  using Error::Error;
};

/// Malformed input file. Carries the 1-based line and column.
class ParseError : public Error {
public:
  ParseError(const std::string& source, std::size_t line, std::size_t column,
             const std::string& what)
      : Error(source + ":" + std::to_string(line) + ":" + std::to_string(column) +
              ": " + what),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace gravinv
