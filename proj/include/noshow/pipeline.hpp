#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "noshow/dataset.hpp"
#include "noshow/encoding.hpp"
#include "noshow/evaluation.hpp"
#include "noshow/explain.hpp"
#include "noshow/forest.hpp"
#include "noshow/linear_model.hpp"
#include "noshow/neural.hpp"
#include "noshow/serialization.hpp"

namespace noshow::pipeline {

enum class ModelKind { Linear, Forest, Mlp };

std::string_view to_string(ModelKind k);
/// Accepts linear|forest|mlp and the short forms lr|rf|nn.
ModelKind parse_model_kind(std::string_view s);
/// "LR", "RF" or "NN".
std::string_view short_name(ModelKind k);

struct TrainOptions {
  ModelKind kind = ModelKind::Linear;
  std::optional<data::Service> service;
  std::uint64_t seed = 0;
  int folds = 10;
  int repetitions = 10;
  bool full_grid = false;
  double train_fraction = 0.7;
  eval::Fractions fractions;
  std::vector<data::Interaction> interactions;
};

using Model = std::variant<linear::FittedLinearModel, forest::ForestModel, neural::MlpModel>;

struct TestMetrics {
  std::size_t n = 0;
  double auroc = 0.0;
  eval::CutoffPolicy policy;
  eval::InterventionMetrics metrics;
};

struct ModelBundle {
  ModelKind kind = ModelKind::Linear;
  std::string service = "ALL";
  std::uint64_t seed = 0;
  std::shared_ptr<const data::FeatureSchema> schema;
  Model model;
  io::Json hyperparameters = io::Json::object();
  eval::CvReport cv_report;
  std::optional<TestMetrics> test;

  /// "SERVICE/MODEL", e.g. "OH/NN".
  std::string tag() const;
  Vector predict(const Matrix& rows) const;
  Vector score(const data::RecordSet& records) const;
};

/// Service filter, stratified 70/30 split, coarse classing and encoding on
/// the training part, grid search with `folds`-fold CV, final fit, repeated
/// CV report with the chosen settings and metrics on the held-out part.
ModelBundle train_model(const data::RecordSet& records, const TrainOptions& options);

struct Evaluation {
  std::size_t n = 0;
  double auroc = 0.0;
  eval::CutoffPolicy policy;
  eval::InterventionMetrics metrics;
};

/// AUROC and coverage/risk of `bundle` on `records` with cut-offs tuned on
/// the same scores.
Evaluation evaluate(const ModelBundle& bundle, const data::RecordSet& records,
                    const eval::Fractions& fractions);
/// Coverage/risk under a fixed policy.
eval::InterventionMetrics apply_policy(const ModelBundle& bundle, const data::RecordSet& records,
                                       const eval::CutoffPolicy& policy);

explain::RelevanceMap explain_record(const ModelBundle& bundle, const data::AppointmentRecord& record);

io::Json to_json(const ModelBundle& bundle);
ModelBundle bundle_from_json(const io::Json& j);
io::Json to_json(const Evaluation& e);

void save(const ModelBundle& bundle, const std::string& path);
ModelBundle load(const std::string& path);

}  // namespace noshow::pipeline
