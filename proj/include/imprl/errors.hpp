#pragma once

#include <stdexcept>
#include <string>

namespace imprl {

// Argument errors use std::invalid_argument.

class NumericError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class UnsupportedError : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

}  // namespace imprl
