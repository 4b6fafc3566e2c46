#pragma once

#include <stdexcept>
#include <string>

namespace navcost {

// Base for every failure raised by the library. IoError is the only branch
// that signals an environment problem; everything else is a validation or
// precondition failure.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// geometry
class HorizonError : public Error {
 public:
  using Error::Error;
};
class OutOfImage : public Error {
 public:
  using Error::Error;
};
class BehindCamera : public Error {
 public:
  using Error::Error;
};
class EmptyTrajectory : public Error {
 public:
  using Error::Error;
};
class InsufficientPoints : public Error {
 public:
  using Error::Error;
};

// route_map
class DegenerateRoute : public Error {
 public:
  using Error::Error;
};
class EmptySequence : public Error {
 public:
  using Error::Error;
};
class OutOfMapBounds : public Error {
 public:
  using Error::Error;
};

// label_gen
class InvalidRate : public Error {
 public:
  using Error::Error;
};
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

// path_oracle / simworld
class NoFeasibleBranch : public Error {
 public:
  using Error::Error;
};
class OffRoad : public Error {
 public:
  using Error::Error;
};
class UnknownBranch : public Error {
 public:
  using Error::Error;
};

// costmap
class NoReachableGoal : public Error {
 public:
  using Error::Error;
};

// evalkit
class UndefinedMetric : public Error {
 public:
  using Error::Error;
};
class EmptyPrediction : public Error {
 public:
  using Error::Error;
};
class EmptyHorizon : public Error {
 public:
  using Error::Error;
};

}  // namespace navcost
