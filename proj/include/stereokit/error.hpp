#pragma once

#include <stdexcept>
#include <string>

namespace stereokit {

// Raised when an operation's inputs violate its preconditions. The CLI maps
// every Error to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Conjugate gradient failed to reach the requested tolerance.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double residual, int iterations)
      : Error(what), residual_(residual), iterations_(iterations) {}

  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

namespace detail {

inline void require(bool cond, const std::string& what) {
  if (!cond) throw Error(what);
}

}  // namespace detail
}  // namespace stereokit
