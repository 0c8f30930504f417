#pragma once

#include <stdexcept>
#include <string>

namespace vitreoforge {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition violated by the caller (bad shape, out-of-range argument, ...).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// Bytes on disk or on the wire that do not follow the expected format.
class MalformedInput : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// A stored artefact (parameter file, manifest) does not match what was asked for.
class Mismatch : public Error {
 public:
  using Error::Error;
};

class NoData : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss or gradient.
class Diverged : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require(bool cond, const std::string& what) {
  if (!cond) throw InvalidInput(what);
}

}  // namespace detail
}  // namespace vitreoforge
