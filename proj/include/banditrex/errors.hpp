#pragma once

#include <stdexcept>
#include <string>

namespace banditrex {

/// Base class for all banditrex errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class LengthMismatch : public Error {
 public:
  using Error::Error;
};

class SolverFailure : public Error {
 public:
  using Error::Error;
};

class MissingEmbedding : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class DuplicateKey : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class EmptyCandidates : public Error {
 public:
  using Error::Error;
};

class TooManyCandidates : public Error {
 public:
  using Error::Error;
};

class MissingRecommendation : public Error {
 public:
  using Error::Error;
};

class EmptyLog : public Error {
 public:
  using Error::Error;
};

class NoTypedEvents : public Error {
 public:
  using Error::Error;
};

class MissingDataFile : public Error {
 public:
  using Error::Error;
};

class GenerationFailure : public Error {
 public:
  using Error::Error;
};

/// Configuration rejected during validation. Carries the offending field
/// so the CLI can name it in the exit message.
class InvalidConfig : public Error {
 public:
  InvalidConfig(std::string field, const std::string& message)
      : Error(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace banditrex
