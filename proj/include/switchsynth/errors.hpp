#pragma once

#include <stdexcept>
#include <string>

namespace switchsynth {

/// Base class of every error raised by the toolkit.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class DivisionByZeroInterval : public Error {
public:
  DivisionByZeroInterval() : Error("interval division by an interval containing zero") {}
};

class DomainError : public Error {
public:
  using Error::Error;
};

class DegenerateBox : public Error {
public:
  DegenerateBox() : Error("cannot bisect a box whose widths are all zero") {}
};

class DimensionMismatch : public Error {
public:
  using Error::Error;
};

class SyntaxError : public Error {
public:
  SyntaxError(int line, int col, const std::string& message)
      : Error(std::to_string(line) + ":" + std::to_string(col) + ": " + message),
        line_(line), col_(col) {}

  int line() const noexcept { return line_; }
  int col() const noexcept { return col_; }

private:
  int line_;
  int col_;
};

class UndeclaredVariable : public Error {
public:
  explicit UndeclaredVariable(const std::string& name)
      : Error("undeclared variable '" + name + "'"), name_(name) {}
  const std::string& name() const noexcept { return name_; }

private:
  std::string name_;
};

class ArityMismatch : public Error {
public:
  using Error::Error;
};

class UnsupportedOrder : public Error {
public:
  using Error::Error;
};

// Integrator failures. EnclosureFailure and StepTooWide are recoverable by
// halving the step; IntegrationFailure is raised once h_min is reached.
class EnclosureFailure : public Error {
public:
  using Error::Error;
};

class StepTooWide : public Error {
public:
  using Error::Error;
};

class IntegrationFailure : public Error {
public:
  using Error::Error;
};

class OutsideDomain : public Error {
public:
  using Error::Error;
};

class FormatError : public Error {
public:
  using Error::Error;
};

class VersionMismatch : public Error {
public:
  using Error::Error;
};

/// Raised when a search runs past its deadline.
class SearchTimeout : public Error {
public:
  using Error::Error;
};

/// Invalid synthesis problem (box inclusion invariants, K, D).
class ProblemError : public Error {
public:
  using Error::Error;
};

}  // namespace switchsynth
