#pragma once

#include <stdexcept>
#include <string>

namespace medfpca {

/// Base class for all medfpca errors. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Bad command-line usage or inconsistent configuration (exit code 2).
class UsageError : public Error {
public:
  explicit UsageError(const std::string& what) : Error(what) {}
};

/// Malformed or invalid input data: schema problems, parse failures,
/// validation failures, provenance mismatches (exit code 3).
class DataError : public Error {
public:
  explicit DataError(const std::string& what) : Error(what) {}
};

/// Numerical failure inside a sampler or decomposition (exit code 4).
class NumericalError : public Error {
public:
  explicit NumericalError(const std::string& what) : Error(what) {}
};

}  // namespace medfpca
