#pragma once

#include <stdexcept>
#include <string>

namespace carbcal {

// Bad input data: malformed files, invalid values. CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A sampler or container invariant was broken. Always a bug. CLI exit code 3.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline void check_invariant(bool ok, const std::string& what) {
  if (!ok) throw InvariantError(what);
}

}  // namespace carbcal
