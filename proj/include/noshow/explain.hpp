#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "noshow/encoding.hpp"
#include "noshow/neural.hpp"

namespace noshow::explain {

struct RelevanceMap {
  RecordId record_id = 0;
  double probability = 0.0;
  double output_relevance = 0.0;  // pre-sigmoid logit
  Vector per_column;
  double bias_absorption = 0.0;  // relevance taken up by b1 and b2
  std::vector<std::pair<std::string, double>> per_variable;
};

/// Epsilon-rule relevance of each input column for the logit of `x`.
/// Positive relevance pushes towards no-show.
RelevanceMap lrp(const neural::MlpModel& model, const data::FeatureSchema& schema,
                 const Eigen::Ref<const Vector>& x, RecordId record_id = 0, double epsilon = 1e-9);

/// Columns in descending probability (ties by record id); rows are the
/// variables that are nonzero for at least one patient.
struct HeatmapTable {
  std::vector<RecordId> record_ids;
  std::vector<double> probabilities;
  std::vector<std::string> variables;
  Matrix cells;  // variables x patients

  void write_csv(std::ostream& out) const;
};

HeatmapTable relevance_heatmap(const std::vector<RelevanceMap>& maps);

}  // namespace noshow::explain
