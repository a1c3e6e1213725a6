#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "noshow/dataset.hpp"
#include "noshow/encoding.hpp"
#include "noshow/evaluation.hpp"

namespace noshow::neural {

using data::ClassWeights;
using data::DesignMatrix;

/// One hidden relu layer, sigmoid output.
struct MlpModel {
  Matrix W1;  // H x N
  Vector b1;  // H
  Vector W2;  // H
  double b2 = 0.0;
  std::uint64_t seed = 0;

  int inputs() const { return static_cast<int>(W1.cols()); }
  int hidden() const { return static_cast<int>(W1.rows()); }
  bool operator==(const MlpModel& o) const {
    return W1 == o.W1 && b1 == o.b1 && W2 == o.W2 && b2 == o.b2 && seed == o.seed;
  }
};

/// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
MlpModel init_mlp(int n_inputs, int n_hidden, std::uint64_t seed);

struct Forward {
  Vector hidden_pre;
  Vector hidden_post;
  double output_pre = 0.0;
  double probability = 0.5;
};

Forward forward(const MlpModel& model, const Eigen::Ref<const Vector>& x);
Vector predict_proba(const MlpModel& model, const Matrix& rows);

struct TrainConfig {
  int n_iterations = 1000;
  double learning_rate = 0.1;
  ClassWeights weights;
};

struct MlpGradient {
  Matrix W1;
  Vector b1;
  Vector W2;
  double b2 = 0.0;
};

/// Mean class-weighted binary cross-entropy and its gradient.
double loss_and_gradient(const MlpModel& model, const Matrix& X, const Vector& labels,
                         const ClassWeights& weights, MlpGradient* gradient);

struct TrainResult {
  MlpModel model;
  std::vector<double> loss_trace;  // [0] = initial loss, then one per iteration
};

/// Called after iteration `iteration` (1-based) with the current parameters.
using Checkpoint = std::function<void(int iteration, const MlpModel& model)>;

/// Full-batch gradient descent for exactly config.n_iterations steps. A step
/// that would raise the loss is retried with half the learning rate, so the
/// loss trace is non-increasing. The input model is not modified.
TrainResult train(const MlpModel& model, const DesignMatrix& X, const TrainConfig& config,
                  const Checkpoint& checkpoint = {});

/// Ten hidden widths evenly spaced (rounded) over [ceil(N/2), 2N], deduplicated.
std::vector<int> hidden_grid(int n_inputs);
/// 100..1600 step 100.
std::vector<int> iteration_grid();

struct NnGrid {
  std::vector<int> hidden;
  std::vector<int> iterations;

  static NnGrid full(int n_inputs);
  static NnGrid fast(int n_inputs);
  std::size_t size() const { return hidden.size() * iterations.size(); }
};

struct NnCell {
  int hidden = 0;
  int iterations = 0;
  eval::CvReport report;
};

struct NnSearchResult {
  int hidden = 0;
  TrainConfig config;
  eval::CvReport report;
  std::vector<NnCell> cells;
};

/// Scores every (hidden width, iteration count) cell by mean CV AUROC. One
/// training run per width and fold serves all iteration counts through
/// checkpoints, which is exact because training is deterministic. Ties prefer
/// the smaller width, then fewer iterations.
NnSearchResult grid_search_nn(const DesignMatrix& X, const ClassWeights& weights, int cv_folds,
                              std::uint64_t seed, const NnGrid& grid, int repetitions = 1,
                              double learning_rate = 0.1);

// ---- entity embeddings -----------------------------------------------------

struct EmbeddingTable {
  std::string variable;
  int levels = 0;
  int dim = 0;
  Matrix table;  // levels x dim
};

struct EmbeddingSpec {
  std::vector<EmbeddingTable> tables;
  int width() const;
};

/// Default dims min(levels - 1, ceil(levels / 2)), at least 1; orthonormal
/// initial tables drawn from `seed`.
EmbeddingSpec default_embedding_spec(const data::FeatureSchema& schema, std::uint64_t seed);
/// Same layout with explicit dims per variable, clamped to [1, levels - 1].
EmbeddingSpec embedding_spec(const data::FeatureSchema& schema, const std::vector<int>& dims,
                             std::uint64_t seed);

/// Level index per row and main variable, decoded from a full one-hot design.
Eigen::MatrixXi categorical_codes(const DesignMatrix& X);

struct EmbeddingModel {
  EmbeddingSpec spec;
  MlpModel mlp;
};

Matrix embed(const EmbeddingSpec& spec, const Eigen::MatrixXi& codes);
Vector predict_proba(const EmbeddingModel& model, const Eigen::MatrixXi& codes);

struct EmbeddingGradient {
  std::vector<Matrix> tables;
  MlpGradient mlp;
};

double loss_and_gradient(const EmbeddingModel& model, const Eigen::MatrixXi& codes,
                         const Vector& labels, const ClassWeights& weights,
                         EmbeddingGradient* gradient);

struct EmbeddingFit {
  EmbeddingModel model;
  std::vector<double> loss_trace;
};

/// Trains embedding tables jointly with an MLP on the categorical codes of a
/// full one-hot design; the MLP input width is spec.width().
EmbeddingFit fit_embeddings(const DesignMatrix& X, const EmbeddingSpec& dims, int n_hidden,
                            const TrainConfig& config, std::uint64_t seed);

}  // namespace noshow::neural
