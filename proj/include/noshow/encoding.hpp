#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "noshow/binning.hpp"
#include "noshow/dataset.hpp"

namespace noshow::data {

inline constexpr int kSchemaVersion = 1;

struct Column {
  std::string variable;  // source variable, "a*b" for interactions
  std::string level;     // level label, "la*lb" for interactions
  bool dropped = false;  // reference level, not materialized

  std::string name() const { return variable + "=" + level; }
  bool operator==(const Column&) const = default;
};

using Interaction = std::pair<Variable, Variable>;

/// Levels of one encoded variable and the index of its dropped reference.
struct VariableLevels {
  Variable variable = Variable::Gender;
  std::vector<std::string> levels;
  int reference = -1;  // -1 when the full one-hot block is kept

  bool operator==(const VariableLevels&) const = default;
};

/// Column layout of a DesignMatrix. Each main variable occupies a contiguous
/// block of retained columns, followed by the interaction blocks in request
/// order.
class FeatureSchema {
 public:
  FeatureSchema() = default;
  FeatureSchema(std::vector<VariableLevels> variables, std::vector<BinSpec> bins,
                std::vector<Interaction> interactions);

  const std::vector<Column>& columns() const { return columns_; }
  /// Retained columns only, in matrix order.
  const std::vector<Column>& retained() const { return retained_; }
  int width() const { return static_cast<int>(retained_.size()); }
  const std::vector<VariableLevels>& variables() const { return variables_; }
  const std::vector<BinSpec>& bins() const { return bins_; }
  const std::vector<Interaction>& interactions() const { return interactions_; }
  bool drops_reference() const;

  /// Retained-column range [first, last) of a main variable or interaction.
  std::pair<int, int> block(std::size_t variable_index) const { return blocks_[variable_index]; }
  std::pair<int, int> interaction_block(std::size_t k) const {
    return blocks_[variables_.size() + k];
  }
  /// Name of the source variable owning each retained column.
  const std::string& source_of(int column) const { return retained_[column].variable; }
  std::vector<std::string> column_names() const;

  /// Level label of `r` for a main variable (binned for age and lead time).
  std::string level_of(const AppointmentRecord& r, Variable v) const;
  const BinSpec* bins_for(Variable v) const;

  bool operator==(const FeatureSchema& o) const {
    return variables_ == o.variables_ && bins_ == o.bins_ && interactions_ == o.interactions_;
  }

 private:
  std::vector<VariableLevels> variables_;
  std::vector<BinSpec> bins_;
  std::vector<Interaction> interactions_;
  std::vector<Column> columns_;
  std::vector<Column> retained_;
  std::vector<std::pair<int, int>> blocks_;
};

/// Variables encoded by default: the patient and appointment attributes.
std::vector<Variable> default_variables();

struct EncodeOptions {
  std::vector<Variable> variables = default_variables();
  bool drop_reference = false;
  std::vector<Interaction> interactions;
};

/// Derives levels (and the most frequent level as reference, ties to the
/// lexicographically smallest name) from `records`.
FeatureSchema fit_schema(const RecordSet& records, const std::vector<BinSpec>& bins,
                         const EncodeOptions& options);

/// Fits age and lead-time bins on `records` with the given tree options.
std::vector<BinSpec> fit_bins(const RecordSet& records, const CoarseClassOptions& options = {});

/// Binned, one-hot design matrix. Immutable; the schema is shared.
struct DesignMatrix {
  Matrix rows;
  Vector labels;  // 1 = no-show
  std::shared_ptr<const FeatureSchema> schema;
  std::vector<RecordId> row_ids;

  Eigen::Index size() const { return rows.rows(); }
  int width() const { return static_cast<int>(rows.cols()); }
  DesignMatrix subset(std::span<const std::size_t> indices) const;
};

/// Encodes records against a fixed schema. A level unseen by the schema
/// raises an Encoding error naming the variable and level.
DesignMatrix encode(const RecordSet& records, std::shared_ptr<const FeatureSchema> schema);
Vector encode_row(const AppointmentRecord& record, const FeatureSchema& schema);

/// Fit-and-encode in one step.
DesignMatrix encode(const RecordSet& records, const std::vector<BinSpec>& bins,
                    bool drop_reference, const std::vector<Interaction>& interactions = {});

/// Main-variable levels reproduced from an encoded row (reference level when
/// a dropped block is all zero).
std::map<Variable, std::string> decode_row(const FeatureSchema& schema,
                                           const Eigen::Ref<const Vector>& row);

}  // namespace noshow::data
