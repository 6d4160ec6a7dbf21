#pragma once

#include <stdexcept>
#include <string>

namespace vfiq {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad or missing user input: files, manifests, image dimensions.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent backbone weights / quality model files.
class ModelError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure: non-finite loss, degenerate statistics.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace vfiq
