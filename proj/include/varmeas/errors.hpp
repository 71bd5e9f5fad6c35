#pragma once

#include <stdexcept>
#include <string>

namespace varmeas {

/// Base of every exception thrown by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Two objects were combined that live on different atom spaces.
struct SpaceMismatch : Error {
  using Error::Error;
};

/// Vector / body dimensions disagree.
struct DimensionMismatch : Error {
  using Error::Error;
};

/// An argument violates a documented precondition.
struct InvalidArgument : Error {
  using Error::Error;
};

/// A checker was asked to run on an instance its preconditions exclude.
struct PreconditionFailed : Error {
  using Error::Error;
};

/// A library invariant was observed broken at run time. Indicates a bug.
struct InvariantBreach : Error {
  using Error::Error;
};

namespace detail {

inline void require(bool cond, const std::string& what) {
  if (!cond) throw InvalidArgument(what);
}

}  // namespace detail
}  // namespace varmeas
