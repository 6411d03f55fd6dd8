#pragma once

#include <stdexcept>
#include <string>

namespace cwhom {

// A physical argument left its valid domain (negative time, zero energy, ...).
class domain_error : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// An interface was misused: empty input, too few points, malformed file.
class usage_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A requested grid is too coarse for the feature being sampled.
class resolution_error : public usage_error {
 public:
  using usage_error::usage_error;
};

// Two gridded objects that must share a grid do not.
class grid_error : public usage_error {
 public:
  using usage_error::usage_error;
};

}  // namespace cwhom
