#pragma once

#include <stdexcept>
#include <string>

namespace mcofdma {

/// Caller violated a precondition (bad index, bad shape, out-of-range parameter).
class UsageError : public std::invalid_argument {
 public:
  explicit UsageError(const std::string& what) : std::invalid_argument(what) {}
};

/// A candidate solution does not satisfy the problem constraints.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// An algorithm broke one of its own invariants.
class InternalError : public std::logic_error {
 public:
  explicit InternalError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace mcofdma
