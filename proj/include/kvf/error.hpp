#pragma once

#include <stdexcept>
#include <string>

namespace kvf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (bad grid size, tau <= 0, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// The requested bundle topology is not representable on the lattice.
class UnsupportedTopology : public Error {
 public:
  using Error::Error;
};

/// A time step produced non-finite values.
class InstabilityError : public Error {
 public:
  InstabilityError(const std::string& monitor, const std::string& what)
      : Error(what), monitor_(monitor) {}
  const std::string& monitor() const { return monitor_; }

 private:
  std::string monitor_;
};

/// Requested Higgs parameter lies below the Bradlow threshold.
class InfeasibleError : public Error {
 public:
  InfeasibleError(double threshold, const std::string& what) : Error(what), threshold_(threshold) {}
  double threshold() const { return threshold_; }

 private:
  double threshold_;
};

/// An iterative solver ran out of iterations.
class NonConvergence : public Error {
 public:
  using Error::Error;
};

/// The vortex flow was asked to run on a pair that is not (approximately) holomorphic.
class HolomorphyError : public Error {
 public:
  using Error::Error;
};

}  // namespace kvf
