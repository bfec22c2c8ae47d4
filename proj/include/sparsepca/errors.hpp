#pragma once

#include <stdexcept>
#include <string>

namespace sparsepca {

/// Malformed or inconsistent input (corpus, matrix file, cache file).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An id or index outside the range declared by a header.
class RangeError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Loss of positive definiteness, failed root bracketing and similar.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A configuration that admits no solution (e.g. lambda above every variance).
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sparsepca
