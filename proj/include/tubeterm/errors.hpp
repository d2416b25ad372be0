#pragma once

#include <stdexcept>
#include <string>

namespace tubeterm {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Shape or spacing mismatch between volumes that must share geometry.
class GeometryError : public Error {
public:
  using Error::Error;
};

/// A precondition on arguments was violated (bad parameter, empty input, ...).
class ContractError : public Error {
public:
  using Error::Error;
};

/// A metric that is undefined for the given inputs (e.g. Hausdorff of an empty mask).
class UndefinedMetric : public ContractError {
public:
  using ContractError::ContractError;
};

/// File system failure.
class IoError : public Error {
public:
  using Error::Error;
};

/// Malformed volume file. `field()` names the offending header field or
/// condition ("magic", "sizeof_hdr", "datatype", "dim", "truncated", ...).
class FormatError : public IoError {
public:
  FormatError(std::string field, const std::string& detail)
      : IoError(field + ": " + detail), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

private:
  std::string field_;
};

}  // namespace tubeterm
