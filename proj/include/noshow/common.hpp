#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace noshow {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RecordId = std::int64_t;

enum class ErrorKind {
  Validation,   // bad parameters or input values
  Schema,       // file or model schema mismatch
  Encoding,     // level unknown to a feature schema
  Dimension,    // width mismatch between row and model
  Convergence,  // solver did not reach tolerance
  Divergence,   // non-finite loss during training
  Metric,       // metric undefined for the given labels
  Policy,       // invalid cut-off fractions
  Search,       // every grid cell failed
  Propagation,  // non-finite activation during relevance propagation
  Io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double last_objective)
      : Error(ErrorKind::Convergence, what), last_objective_(last_objective) {}
  double last_objective() const noexcept { return last_objective_; }

 private:
  double last_objective_;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int iteration)
      : Error(ErrorKind::Divergence, what), iteration_(iteration) {}
  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

inline void require(bool ok, ErrorKind kind, const std::string& what) {
  if (!ok) throw Error(kind, what);
}

template <std::floating_point Scalar>
Scalar sigmoid(Scalar z) {
  if (z >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-z));
  const Scalar e = std::exp(z);
  return e / (Scalar(1) + e);
}

/// log(1 + exp(z)) without overflow.
template <std::floating_point Scalar>
Scalar softplus(Scalar z) {
  if (z > Scalar(0)) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

template <std::floating_point Scalar>
Scalar logit(Scalar p) {
  return std::log(p / (Scalar(1) - p));
}

/// Elementwise sigmoid of a dense expression.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> sigmoid(
    const Eigen::MatrixBase<Derived>& z) {
  using S = typename Derived::Scalar;
  return z.unaryExpr([](S v) { return sigmoid(v); });
}

}  // namespace noshow
