#pragma once

#include <span>
#include <string>
#include <vector>

#include "noshow/dataset.hpp"

namespace noshow::data {

/// Half-open integer intervals: bin 0 is (-inf, c0), bin i is [c(i-1), ci),
/// the last bin is [c(k-1), +inf). Out-of-range values clamp naturally into
/// the outermost bins.
class BinSpec {
 public:
  BinSpec() = default;
  BinSpec(Variable variable, std::vector<int> cut_points);

  Variable variable() const { return variable_; }
  const std::vector<int>& cut_points() const { return cut_points_; }
  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t bin_count() const { return cut_points_.size() + 1; }

  std::size_t bin_of(int value) const;
  const std::string& label_of(int value) const { return labels_[bin_of(value)]; }

  bool operator==(const BinSpec& o) const {
    return variable_ == o.variable_ && cut_points_ == o.cut_points_;
  }

 private:
  Variable variable_ = Variable::Age;
  std::vector<int> cut_points_;
  std::vector<std::string> labels_;
};

/// Bands used by the descriptive tables: age by decades up to 60, lead time
/// 0-15, 15-30, 30-60 and over 60 days.
BinSpec table_age_bands();
BinSpec table_lead_time_bands();

struct CoarseClassOptions {
  int max_bins = 6;
  double min_leaf_fraction = 0.05;
};

/// Supervised binning of one integer variable: the Gini-optimal partition
/// into at most max_bins contiguous intervals, each holding at least
/// ceil(min_leaf_fraction * n) samples. Among bin counts the smallest one that
/// reaches the minimal impurity is returned, so a split that does not reduce
/// impurity is never made.
BinSpec coarse_class(Variable variable, std::span<const int> values,
                     std::span<const int> outcomes, const CoarseClassOptions& options = {});

}  // namespace noshow::data
