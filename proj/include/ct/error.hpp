#pragma once

#include <stdexcept>
#include <string>

namespace ct {

// Base of every error raised by the library. Callers that only care about
// "something went wrong" catch this; the subclasses carry the category.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input text that does not match the expected grammar (hex codes, ids,
// dates, CSV rows).
class MalformedInput : public Error {
 public:
  using Error::Error;
};

class EntropyUnavailable : public Error {
 public:
  EntropyUnavailable() : Error("entropy source unavailable") {}
};

// Operation requires a powered token.
class TokenOff : public Error {
 public:
  TokenOff() : Error("token is powered off") {}
};

// Presented private code does not hash to the claimed public id.
class AuthenticationFailure : public Error {
 public:
  using Error::Error;
};

// Transport-level failure talking to a remote service.
class NetworkError : public Error {
 public:
  using Error::Error;
};

}  // namespace ct
