#pragma once

#include <stdexcept>
#include <string>

namespace pencil {

/// Precondition or domain violation on caller-supplied data.
class InvalidInputError : public std::runtime_error {
public:
  explicit InvalidInputError(const std::string& what) : std::runtime_error(what) {}
};

/// File could not be read, written or parsed.
class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Training produced a non-finite loss or parameter. Carries phase context.
class DivergenceError : public std::runtime_error {
public:
  explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

/// The finite-difference oracle could not evaluate its target function.
class OracleFailureError : public std::runtime_error {
public:
  explicit OracleFailureError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace pencil
