// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace evflow {

/// Tensor shapes do not agree with what an operation requires.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A caller-supplied argument is outside the accepted domain.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed input file; carries the offending line or record index.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t index)
      : std::runtime_error(what + " (at index " + std::to_string(index) + ")"), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// An event stream does not cover the time span a segmentation needs.
class CoverageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// backward() was invoked on a graph whose buffers were already released.
class StaleGraphError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace evflow
