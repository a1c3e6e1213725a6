#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "noshow/dataset.hpp"

namespace noshow::synth {

struct LevelDistribution {
  std::vector<std::string> levels;
  std::vector<double> weights;

  bool operator==(const LevelDistribution&) const = default;
};

/// Variables are sampled independently given the service. Age and lead time
/// are drawn as table bands, then uniformly inside the band. Effect keys use
/// the encoded column names: "lead_time=>=60", "gender*day=F*SAT".
struct GeneratorSpec {
  std::int64_t n = 10000;
  std::uint64_t seed = 0;
  std::map<std::string, double> service_mix;  // service -> share
  std::map<std::string, LevelDistribution> frequencies;
  std::map<std::string, std::map<std::string, LevelDistribution>> service_frequencies;
  std::map<std::string, std::string> zones;  // zone_id -> income class
  double true_intercept = 0.0;
  std::map<std::string, double> true_coefficients;
  std::map<std::string, std::map<std::string, double>> service_coefficients;
  std::map<std::string, double> interaction_effects;

  bool operator==(const GeneratorSpec&) const = default;
};

/// Uniform levels, all services equally likely, no effects.
GeneratorSpec default_spec();
/// Service mix, gender/age/lead-time frequencies and rates of the
/// descriptive table of the source population.
GeneratorSpec table8_preset();

void validate(const GeneratorSpec& spec);

data::RecordSet generate(const GeneratorSpec& spec);

double true_logit(const GeneratorSpec& spec, const data::AppointmentRecord& record);
Vector true_probabilities(const GeneratorSpec& spec, const data::RecordSet& records);
/// AUROC of the true probabilities.
double bayes_auroc(const GeneratorSpec& spec, const data::RecordSet& records);

}  // namespace noshow::synth
