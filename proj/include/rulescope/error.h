#ifndef RULESCOPE_ERROR_H_
#define RULESCOPE_ERROR_H_

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rulescope {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input document. `location` is machine readable, e.g.
// "credit.csv:12:Income" or "model.json:trees[3].nodes[7]".
class ParseError : public Error {
 public:
  ParseError(std::string location, const std::string& message)
      : Error(location + ": " + message), location_(std::move(location)) {}

  const std::string& location() const { return location_; }

 private:
  std::string location_;
};

// A well-formed document that does not fit the schema it is read against,
// e.g. a CSV missing an attribute column or a model naming unknown features.
class SchemaMismatchError : public ParseError {
 public:
  using ParseError::ParseError;
};

// Inputs parse but are inconsistent with each other or with an invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// The LP solver gave up. Carries the best primal point it had.
class SolverError : public Error {
 public:
  SolverError(const std::string& message, std::vector<double> incumbent)
      : Error(message), incumbent_(std::move(incumbent)) {}

  const std::vector<double>& incumbent() const { return incumbent_; }

 private:
  std::vector<double> incumbent_;
};

}  // namespace rulescope

#endif  // RULESCOPE_ERROR_H_
