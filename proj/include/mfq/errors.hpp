#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace mfq {

/// Argument outside the mathematical domain of a function or distribution.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed call: bad sizes, empty batches, inconsistent configuration.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A NaN or Inf appeared in a computed quantity.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& term, const std::string& detail)
      : std::runtime_error("non-finite " + term + ": " + detail), term_(term) {}
  const std::string& term() const noexcept { return term_; }

 private:
  std::string term_;
};

/// Simulator failure inside a rollout, with the offending step.
class RolloutError : public std::runtime_error {
 public:
  RolloutError(int k, double x, double a, const std::string& what)
      : std::runtime_error(format(k, x, a, what)), k_(k), x_(x), a_(a) {}
  int step() const noexcept { return k_; }
  double state() const noexcept { return x_; }
  double action() const noexcept { return a_; }

 private:
  static std::string format(int k, double x, double a, const std::string& what) {
    std::ostringstream os;
    os << "rollout failed at k=" << k << " (x=" << x << ", a=" << a << "): " << what;
    return os.str();
  }
  int k_;
  double x_;
  double a_;
};

/// Training aborted; carries the 1-based episode index.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(int episode, const std::string& what)
      : std::runtime_error("episode " + std::to_string(episode) + ": " + what),
        episode_(episode) {}
  int episode() const noexcept { return episode_; }

 private:
  int episode_;
};

}  // namespace mfq
