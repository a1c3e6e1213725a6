#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "noshow/dataset.hpp"
#include "noshow/encoding.hpp"
#include "noshow/evaluation.hpp"
#include "noshow/rng.hpp"

namespace noshow::forest {

using data::ClassWeights;
using data::DesignMatrix;

/// Gini impurity 1 - p0^2 - p1^2 of a weighted class mass pair.
template <typename Scalar>
Scalar gini(Scalar mass_show, Scalar mass_no_show) {
  const Scalar total = mass_show + mass_no_show;
  require(total > Scalar(0), ErrorKind::Validation, "gini: zero total mass");
  const Scalar p0 = mass_show / total, p1 = mass_no_show / total;
  return Scalar(1) - p0 * p0 - p1 * p1;
}

struct ForestParams {
  int n_trees = 100;
  int mtry = 6;
  double min_samples_leaf_frac = 1e-3;
  double min_impurity_decrease = 1e-5;

  bool operator==(const ForestParams&) const = default;
};

/// Flat binary tree; node 0 is the root. A node with column < 0 is a leaf.
struct TreeNode {
  int column = -1;
  double threshold = 0.5;  // x[column] <= threshold goes left
  int left = -1;
  int right = -1;
  double mass_show = 0.0;
  double mass_no_show = 0.0;

  bool is_leaf() const { return column < 0; }
  double no_show_fraction() const { return mass_no_show / (mass_show + mass_no_show); }
  bool operator==(const TreeNode&) const = default;
};

struct Tree {
  std::vector<TreeNode> nodes;

  const TreeNode& leaf_for(const Eigen::Ref<const Vector>& x) const;
  double predict(const Eigen::Ref<const Vector>& x) const { return leaf_for(x).no_show_fraction(); }
  int depth() const;
  bool operator==(const Tree&) const = default;
};

struct TreeOptions {
  bool bootstrap = true;
};

/// Grows one class-weighted CART tree. Rows are bootstrapped (n draws with
/// replacement) unless disabled. At each node columns are visited in random
/// order until `mtry` non-constant ones have been scored (more if none of
/// them admits a valid split). A split needs both children to hold at least
/// max(1, ceil(min_samples_leaf_frac * n)) samples and a weighted impurity
/// decrease, (N_t / N) * (I - N_l/N_t I_l - N_r/N_t I_r), of at least
/// min_impurity_decrease.
Tree fit_tree(const DesignMatrix& X, const ClassWeights& weights, const ForestParams& params,
              Rng& rng, const TreeOptions& options = {});

struct ForestModel {
  std::shared_ptr<const data::FeatureSchema> schema;
  std::vector<Tree> trees;
  ForestParams params;
  std::uint64_t seed = 0;
};

/// Tree t is grown from the substream (seed, t); trees fit in parallel.
ForestModel fit_forest(const DesignMatrix& X, const ClassWeights& weights,
                       const ForestParams& params, std::uint64_t seed);

double predict_row(const ForestModel& forest, const Eigen::Ref<const Vector>& x);
Vector predict_proba(const ForestModel& forest, const Matrix& rows);

struct ForestGrid {
  std::vector<int> n_trees;
  std::vector<int> mtry;
  std::vector<double> min_samples_leaf_frac;
  std::vector<double> min_impurity_decrease;

  /// 50..1000 step 50 trees; mtry {2,6,8,10}; both minimums 1e-2..1e-6.
  static ForestGrid full();
  /// Small grid for interactive use.
  static ForestGrid fast();
  std::vector<ForestParams> cells() const;
};

struct GridCell {
  ForestParams params;
  std::optional<eval::CvReport> report;
  std::string error;
};

struct ForestSearchResult {
  ForestParams best;
  eval::CvReport report;
  std::vector<GridCell> cells;
};

/// Scores every cell by mean CV AUROC. Ties prefer fewer trees, then the
/// larger minimum leaf fraction. Failed cells are recorded and skipped.
ForestSearchResult grid_search_rf(const DesignMatrix& X, const ClassWeights& weights,
                                  int cv_folds, std::uint64_t seed,
                                  const ForestGrid& grid = ForestGrid::full(),
                                  int repetitions = 1);

}  // namespace noshow::forest
