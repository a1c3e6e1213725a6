#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "noshow/dataset.hpp"
#include "noshow/encoding.hpp"

namespace noshow::linear {

using data::ClassWeights;
using data::DesignMatrix;
using data::FeatureSchema;

struct FittedLinearModel {
  std::shared_ptr<const FeatureSchema> schema;
  double intercept = 0.0;
  Vector coefficients;
  double penalty_lambda = 0.0;

  int n_nonzero() const { return static_cast<int>((coefficients.array() != 0.0).count()); }
};

struct SolverOptions {
  double tol = 1e-7;       // relative objective change
  int max_iter = 10000;
  double kkt_tol = 1e-6;   // max violation of the subgradient conditions
};

struct SolverTrace {
  std::vector<double> objective;  // after each accepted iteration, [0] = start
  int iterations = 0;
};

/// L1-penalized, class-weighted logistic regression by proximal gradient
/// (ISTA) with backtracking:
///   (1/n) sum_i w_i logloss(y_i, sigma(b0 + b'x_i)) + lambda |b|_1
/// The intercept is not penalized. `warm_start` (same width) seeds the
/// iterate. Throws ConvergenceError after max_iter.
FittedLinearModel fit_l1_logistic(const DesignMatrix& X, double lambda,
                                  const ClassWeights& weights, const SolverOptions& options = {},
                                  const FittedLinearModel* warm_start = nullptr,
                                  SolverTrace* trace = nullptr);

/// Penalized objective of (intercept, coefficients) on X.
double objective(const DesignMatrix& X, const ClassWeights& weights, double lambda,
                 double intercept, const Vector& coefficients);

/// Gradient of the smooth (log-loss) part; element 0 is the intercept.
Vector smooth_gradient(const DesignMatrix& X, const ClassWeights& weights, double intercept,
                       const Vector& coefficients);

/// Largest violation of the L1 optimality conditions at a solution.
double kkt_violation(const DesignMatrix& X, const ClassWeights& weights,
                     const FittedLinearModel& model);

double predict_row(const FittedLinearModel& model, const Eigen::Ref<const Vector>& x);
Vector predict_proba(const FittedLinearModel& model, const Matrix& rows);

/// Thirty penalties, ten per interval (0,0.1], (0.1,1], (1,10], equally
/// spaced and ending at each upper bound.
std::vector<double> penalty_grid();

struct PathEntry {
  double lambda = 0.0;
  double mean_cv_auroc = 0.0;
  double std_cv_auroc = 0.0;
  double n_nonzero = 0.0;  // mean over folds
};

struct PenaltyPath {
  std::vector<PathEntry> entries;
};

/// Cross-validated AUROC and sparsity along penalty_grid(). Folds are
/// stratified and drawn from `seed`; within a fold the path is solved from
/// the largest penalty down with warm starts.
PenaltyPath penalty_path(const DesignMatrix& X, const ClassWeights& weights, int cv_folds,
                         std::uint64_t seed, const SolverOptions& options = {});

/// Sparsest entry whose AUROC is within `delta` of the best; ties go to the
/// larger penalty.
double select_penalty(const PenaltyPath& path, double delta = 0.005);

struct OddsRatioRow {
  std::string column_name;
  double mean_coefficient = 0.0;
  double odds_ratio = 1.0;
};

struct OddsRatioTable {
  std::vector<OddsRatioRow> rows;
};

/// Per-column mean coefficient over fits sharing one schema, and its exp.
OddsRatioTable odds_ratios(std::span<const FittedLinearModel> models);

}  // namespace noshow::linear
