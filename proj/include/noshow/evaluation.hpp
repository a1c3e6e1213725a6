#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "noshow/common.hpp"
#include "noshow/encoding.hpp"

namespace noshow::eval {

using data::DesignMatrix;

/// Mann-Whitney AUROC: share of (positive, negative) pairs ranked correctly,
/// ties counted one half. Throws a Metric error unless both classes occur.
double auroc(std::span<const double> scores, std::span<const int> labels);

template <typename DerivedS, typename DerivedL>
double auroc(const Eigen::MatrixBase<DerivedS>& scores, const Eigen::MatrixBase<DerivedL>& labels) {
  const Eigen::VectorXd s = scores.template cast<double>();
  std::vector<int> y(static_cast<std::size_t>(labels.size()));
  for (Eigen::Index i = 0; i < labels.size(); ++i) y[static_cast<std::size_t>(i)] = labels(i) > 0.5;
  return auroc(std::span<const double>(s.data(), static_cast<std::size_t>(s.size())), y);
}

/// Fold index (0..folds-1) per row; each class is shuffled and dealt
/// round-robin, so fold class counts differ by at most one.
std::vector<int> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed);
std::vector<int> stratified_folds(const Vector& labels, int folds, std::uint64_t seed);

struct CvReport {
  std::string model_tag;
  int folds = 0;
  int repetitions = 0;
  std::vector<double> fold_scores;  // repetition-major
  double mean = 0.0;
  double std = 0.0;  // population standard deviation

  static CvReport from_scores(std::string tag, int folds, int repetitions,
                              std::vector<double> scores);
};

/// Fits on `train` and returns scores for the rows of `test`. `seed` is the
/// fold's own substream seed.
using Trainer =
    std::function<Vector(const DesignMatrix& train, const DesignMatrix& test, std::uint64_t seed)>;

/// Repeated stratified k-fold CV; repetition r reshuffles with the substream
/// (seed, r). Folds run in parallel; the report does not depend on the
/// schedule. A failing fold aborts with its (repetition, fold) identity.
CvReport cross_validate(const Trainer& trainer, const DesignMatrix& X, int folds = 10,
                        int repetitions = 10, std::uint64_t seed = 0,
                        const std::string& model_tag = {});

/// Train/test row index lists of one fold.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> fold_indices(
    std::span<const int> assignment, int fold);

enum class Group { A, B, C };
char to_char(Group g);

struct Fractions {
  double a = 0.3, b = 0.4, c = 0.3;
};

/// Parses "a,b,c".
Fractions parse_fractions(const std::string& text);

/// Boundary between two groups. A record is at or above the boundary when
/// its score exceeds `score`, or equals it and its record_id is >= tie_id.
struct Threshold {
  double score = 0.0;
  RecordId tie_id = INT64_MIN;

  bool at_or_above(double s, RecordId id) const {
    return s > score || (s == score && id >= tie_id);
  }
};

struct CutoffPolicy {
  Fractions fractions;
  Threshold t1;  // lower edge of B
  Threshold t2;  // lower edge of C
};

struct ScoredRecord {
  RecordId record_id = 0;
  double score = 0.0;
};

/// Group A takes the first ceil(f_A n) records in (score, record_id) order,
/// A and B together ceil((f_A + f_B) n); C takes the rest.
CutoffPolicy tune_cutoffs(std::span<const ScoredRecord> scores, const Fractions& fractions);

/// score < t1 -> A, t1 <= score < t2 -> B, score >= t2 -> C.
std::map<RecordId, Group> assign_groups(std::span<const ScoredRecord> scores,
                                        const CutoffPolicy& policy);

struct InterventionMetrics {
  std::string model_tag;
  double coverage = 0.0;  // no-shows in C / all no-shows
  double risk = 0.0;      // no-shows in A / all no-shows
  std::array<std::int64_t, 3> group_sizes{};
  std::array<std::int64_t, 3> no_show_counts{};
};

InterventionMetrics coverage_risk(const std::map<RecordId, Group>& groups,
                                  const std::map<RecordId, int>& labels);

struct ComparisonRow {
  std::string service;
  std::string model;
  double mean_auroc = 0.0;
  double std_auroc = 0.0;
  double risk = 0.0;
  double coverage = 0.0;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;

  /// Rows as "OH | NN | 2% | 70%" (service | model | risk | coverage).
  std::vector<std::string> render_rows() const;
  std::string to_csv() const;
};

/// Joins CV reports with intervention metrics by model tag "SERVICE/MODEL".
ComparisonTable compare_models(std::span<const CvReport> reports,
                               std::span<const InterventionMetrics> metrics);

}  // namespace noshow::eval
