#pragma once

#include <stdexcept>
#include <string>

namespace critdual {

// Base for everything the library throws on purpose. The CLI maps the
// subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad parameters, off-hyperbola input, violated preconditions.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// An iterative method (bisection, fixed point, linear solve) failed.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// The grid or the profile is too coarse / too short for the request.
class ResolutionError : public Error {
 public:
  using Error::Error;
};

// A requested improper integral does not converge.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace critdual
