#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace flab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed metric text. `column` is 1-based.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int column, std::vector<std::string> expected)
      : Error(what), column_(column), expected_(std::move(expected)) {}
  int column() const { return column_; }
  const std::vector<std::string>& expected() const { return expected_; }

 private:
  int column_;
  std::vector<std::string> expected_;
};

/// Evaluation outside the region where the metric is smooth and positive.
class DomainError : public Error {
 public:
  using Error::Error;
};

class NotStronglyConvex : public Error {
 public:
  explicit NotStronglyConvex(double min_eig)
      : Error("fundamental tensor not positive definite (min eigenvalue " +
              std::to_string(min_eig) + ")"),
        min_eigenvalue(min_eig) {}
  double min_eigenvalue;
};

class NotStronglyPseudoconvex : public Error {
 public:
  explicit NotStronglyPseudoconvex(double min_eig)
      : Error("Levi matrix not positive definite (min eigenvalue " +
              std::to_string(min_eig) + ")"),
        min_eigenvalue(min_eig) {}
  double min_eigenvalue;
};

class DegenerateFlag : public Error {
 public:
  using Error::Error;
};

/// ct_lambda evaluated at or beyond its first pole.
class PoleError : public Error {
 public:
  using Error::Error;
};

class ConjugateReached : public Error {
 public:
  ConjugateReached(double t)
      : Error("conjugate point reached at t = " + std::to_string(t)), time(t) {}
  double time;
};

/// Integration could not proceed (step size underflow, chart exit, ...).
class IntegrationError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class HypothesisError : public Error {
 public:
  using Error::Error;
};

}  // namespace flab
