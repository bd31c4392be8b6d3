#pragma once

#include <stdexcept>
#include <string>

namespace radfiner {

// Malformed input files, invariant violations in loaded data, bad configs.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite losses, failed gradient checks, divergence.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape mismatches and other programming errors in the tensor layer.
class ShapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace radfiner
