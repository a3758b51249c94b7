#pragma once

#include <stdexcept>
#include <string>

namespace eac {

/// Parameter or joint value outside its declared bounds.
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Unknown asset, part, joint, blueprint or strategy id.
class NotFoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input that violates an operation's precondition (too few points, empty lists).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed file or reasoner reply.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reasoner endpoint unreachable or returned a transport-level failure.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Motion planning could not produce a valid trajectory.
class PlanningError : public std::runtime_error {
 public:
  PlanningError(const std::string& what, std::string blocking_part = {})
      : std::runtime_error(what), blocking_part_(std::move(blocking_part)) {}
  const std::string& blocking_part() const { return blocking_part_; }

 private:
  std::string blocking_part_;
};

}  // namespace eac
