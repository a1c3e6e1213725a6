#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "noshow/binning.hpp"

namespace noshow::data {

BinSpec::BinSpec(Variable variable, std::vector<int> cut_points)
    : variable_(variable), cut_points_(std::move(cut_points)) {
  for (std::size_t i = 1; i < cut_points_.size(); ++i) {
    require(cut_points_[i - 1] < cut_points_[i], ErrorKind::Validation,
            "cut points must be strictly increasing");
  }
  if (cut_points_.empty()) {
    labels_.push_back("all");
    return;
  }
  labels_.push_back("<" + std::to_string(cut_points_.front()));
  for (std::size_t i = 1; i < cut_points_.size(); ++i) {
    labels_.push_back("[" + std::to_string(cut_points_[i - 1]) + "," +
                      std::to_string(cut_points_[i]) + ")");
  }
  labels_.push_back(">=" + std::to_string(cut_points_.back()));
}

std::size_t BinSpec::bin_of(int value) const {
  return static_cast<std::size_t>(
      std::upper_bound(cut_points_.begin(), cut_points_.end(), value) - cut_points_.begin());
}

BinSpec table_age_bands() { return BinSpec(Variable::Age, {10, 20, 30, 40, 50, 60}); }
BinSpec table_lead_time_bands() { return BinSpec(Variable::LeadTime, {15, 30, 60}); }

BinSpec coarse_class(Variable variable, std::span<const int> values,
                     std::span<const int> outcomes, const CoarseClassOptions& options) {
  require(options.max_bins >= 2, ErrorKind::Validation, "coarse_class: max_bins must be >= 2");
  require(values.size() == outcomes.size(), ErrorKind::Validation,
          "coarse_class: values and outcomes differ in length");
  const std::size_t n = values.size();
  const auto min_leaf = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(options.min_leaf_fraction * static_cast<double>(n) - 1e-9)));
  require(n >= 2 * min_leaf, ErrorKind::Validation,
          "coarse_class: need at least 2 * min_leaf samples");

  // distinct values with per-value counts
  std::map<int, std::pair<double, double>> tally;  // value -> (count, positives)
  for (std::size_t i = 0; i < n; ++i) {
    auto& t = tally[values[i]];
    t.first += 1.0;
    t.second += outcomes[i] != 0 ? 1.0 : 0.0;
  }
  const std::size_t d = tally.size();
  std::vector<int> distinct;
  std::vector<double> cum_n(d + 1, 0.0), cum_pos(d + 1, 0.0);
  std::size_t k = 0;
  for (const auto& [v, t] : tally) {
    distinct.push_back(v);
    cum_n[k + 1] = cum_n[k] + t.first;
    cum_pos[k + 1] = cum_pos[k] + t.second;
    ++k;
  }
  // n_seg * gini(seg) = 2 p q / n_seg
  auto cost = [&](std::size_t i, std::size_t j) {
    const double m = cum_n[j] - cum_n[i];
    const double p = cum_pos[j] - cum_pos[i];
    return 2.0 * p * (m - p) / m;
  };
  auto big_enough = [&](std::size_t i, std::size_t j) {
    return cum_n[j] - cum_n[i] >= static_cast<double>(min_leaf);
  };

  // best[b][j]: minimal cost of splitting the first j distinct values into b segments
  const auto max_bins = static_cast<std::size_t>(options.max_bins);
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> best(max_bins + 1, std::vector<double>(d + 1, inf));
  std::vector<std::vector<std::size_t>> arg(max_bins + 1, std::vector<std::size_t>(d + 1, 0));
  best[0][0] = 0.0;
  for (std::size_t b = 1; b <= max_bins; ++b) {
    for (std::size_t j = 1; j <= d; ++j) {
      for (std::size_t i = b - 1; i < j; ++i) {
        if (best[b - 1][i] == inf || !big_enough(i, j)) continue;
        const double c = best[b - 1][i] + cost(i, j);
        if (c < best[b][j]) {
          best[b][j] = c;
          arg[b][j] = i;
        }
      }
    }
  }

  double overall = inf;
  for (std::size_t b = 1; b <= max_bins; ++b) overall = std::min(overall, best[b][d]);
  std::size_t chosen = 1;
  const double slack = 1e-9 * std::max(1.0, overall);
  for (std::size_t b = 1; b <= max_bins; ++b) {
    if (best[b][d] <= overall + slack) {
      chosen = b;
      break;
    }
  }
  std::vector<int> cuts;
  for (std::size_t b = chosen, j = d; b > 1; --b) {
    j = arg[b][j];
    cuts.push_back(distinct[j]);
  }
  std::reverse(cuts.begin(), cuts.end());
  return BinSpec(variable, std::move(cuts));
}

}  // namespace noshow::data
