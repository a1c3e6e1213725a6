#pragma once

#include <string>

#include <json.hpp>

#include "noshow/encoding.hpp"
#include "noshow/evaluation.hpp"
#include "noshow/explain.hpp"
#include "noshow/forest.hpp"
#include "noshow/linear_model.hpp"
#include "noshow/neural.hpp"
#include "noshow/synth.hpp"

namespace noshow::io {

using Json = nlohmann::json;

Json to_json(const data::BinSpec& bins);
data::BinSpec bin_spec_from_json(const Json& j);

Json to_json(const data::FeatureSchema& schema);
data::FeatureSchema schema_from_json(const Json& j);

Json to_json(const linear::FittedLinearModel& model);
linear::FittedLinearModel linear_from_json(const Json& j);

Json to_json(const forest::ForestParams& params);
forest::ForestParams forest_params_from_json(const Json& j);
Json to_json(const forest::ForestModel& model);
forest::ForestModel forest_from_json(const Json& j);

Json to_json(const neural::MlpModel& model);
neural::MlpModel mlp_from_json(const Json& j);
Json to_json(const neural::TrainConfig& config);
neural::TrainConfig train_config_from_json(const Json& j);

Json to_json(const eval::CvReport& report);
eval::CvReport cv_report_from_json(const Json& j);
Json to_json(const eval::CutoffPolicy& policy);
eval::CutoffPolicy policy_from_json(const Json& j);
Json to_json(const eval::Fractions& f);
eval::Fractions fractions_from_json(const Json& j);
Json to_json(const eval::InterventionMetrics& metrics);
eval::InterventionMetrics metrics_from_json(const Json& j);
Json to_json(const eval::ComparisonTable& table);

Json to_json(const linear::PenaltyPath& path);
Json to_json(const linear::OddsRatioTable& table);

Json to_json(const explain::RelevanceMap& map);
Json to_json(const explain::HeatmapTable& table);

Json to_json(const synth::GeneratorSpec& spec);
synth::GeneratorSpec generator_spec_from_json(const Json& j);

/// Two-space indented text with a trailing newline.
std::string dump(const Json& j);
Json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);
void write_json_file(const std::string& path, const Json& j);

}  // namespace noshow::io
