#pragma once

#include <stdexcept>
#include <string>

namespace hidpop {

// Numerical breakdown (non-SPD matrix, singular block). Carries an optional
// condition estimate and, once it escapes the sampler, the sweep index.
class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string& what, double condition = 0.0, long iteration = -1)
      : std::runtime_error(what), condition_(condition), iteration_(iteration) {}

  double condition() const noexcept { return condition_; }
  long iteration() const noexcept { return iteration_; }

private:
  double condition_;
  long iteration_;
};

// Malformed input file. `line` is 1-based, 0 when not tied to a line.
class FormatError : public std::runtime_error {
public:
  FormatError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

// Input that parses but violates a model invariant.
class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace hidpop
