#include "noshow/forest.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include "noshow/parallel.hpp"

namespace noshow::forest {

const TreeNode& Tree::leaf_for(const Eigen::Ref<const Vector>& x) const {
  const TreeNode* node = &nodes.front();
  while (!node->is_leaf()) {
    node = &nodes[static_cast<std::size_t>(x[node->column] <= node->threshold ? node->left : node->right)];
  }
  return *node;
}

int Tree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].is_leaf()) continue;
    d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
    d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    deepest = std::max(deepest, d[i] + 1);
  }
  return deepest;
}

namespace {

struct Split {
  int column = -1;
  double threshold = 0.0;
  double decrease = -1.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const DesignMatrix& X, const ClassWeights& weights, const ForestParams& params,
              Rng& rng)
      : X_(X), params_(params), rng_(rng), binary_(static_cast<std::size_t>(X.width())) {
    for (int c = 0; c < X.width(); ++c) {
      binary_[static_cast<std::size_t>(c)] =
          (X.rows.col(c).array() == 0.0 || X.rows.col(c).array() == 1.0).all();
    }
    row_weight_.resize(static_cast<std::size_t>(X.size()));
    row_label_.resize(static_cast<std::size_t>(X.size()));
    for (Eigen::Index i = 0; i < X.size(); ++i) {
      row_label_[static_cast<std::size_t>(i)] = X.labels[i] > 0.5 ? 1 : 0;
      row_weight_[static_cast<std::size_t>(i)] = weights.of(row_label_[static_cast<std::size_t>(i)]);
    }
  }

  Tree build(std::vector<int> samples) {
    samples_ = std::move(samples);
    const double n = static_cast<double>(samples_.size());
    min_leaf_ = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(params_.min_samples_leaf_frac * n - 1e-9)));
    total_mass_ = 0.0;
    for (int s : samples_) total_mass_ += row_weight_[static_cast<std::size_t>(s)];
    mtry_ = std::min(params_.mtry, X_.width());

    Tree tree;
    struct Pending {
      int node;
      std::size_t lo, hi;
    };
    tree.nodes.emplace_back();
    std::vector<Pending> stack{{0, 0, samples_.size()}};
    while (!stack.empty()) {
      const Pending job = stack.back();
      stack.pop_back();
      auto [m0, m1] = masses(job.lo, job.hi);
      TreeNode& node = tree.nodes[static_cast<std::size_t>(job.node)];
      node.mass_show = m0;
      node.mass_no_show = m1;
      const Split split = best_split(job.lo, job.hi, m0, m1);
      if (split.column < 0) continue;

      const std::size_t mid = partition(job.lo, job.hi, split);
      const int left = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      TreeNode& parent = tree.nodes[static_cast<std::size_t>(job.node)];
      parent.column = split.column;
      parent.threshold = split.threshold;
      parent.left = left;
      parent.right = left + 1;
      stack.push_back({left + 1, mid, job.hi});
      stack.push_back({left, job.lo, mid});
    }
    return tree;
  }

 private:
  std::pair<double, double> masses(std::size_t lo, std::size_t hi) const {
    double m0 = 0.0, m1 = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      const auto s = static_cast<std::size_t>(samples_[i]);
      (row_label_[s] ? m1 : m0) += row_weight_[s];
    }
    return {m0, m1};
  }

  double decrease(double m0, double m1, double l0, double l1) const {
    const double r0 = m0 - l0, r1 = m1 - l1;
    const double mt = m0 + m1, ml = l0 + l1, mr = r0 + r1;
    if (ml <= 0.0 || mr <= 0.0) return -1.0;
    const double parent = gini(m0, m1);
    return mt / total_mass_ *
           (parent - ml / mt * gini(l0, l1) - mr / mt * gini(r0, r1));
  }

  // Returns false when the column is constant on the node.
  bool score_column(int c, std::size_t lo, std::size_t hi, double m0, double m1, Split& best) {
    const std::size_t count = hi - lo;
    if (binary_[static_cast<std::size_t>(c)]) {
      double l0 = 0.0, l1 = 0.0;
      std::size_t n_left = 0;
      for (std::size_t i = lo; i < hi; ++i) {
        const auto s = static_cast<std::size_t>(samples_[i]);
        if (X_.rows(static_cast<Eigen::Index>(s), c) == 0.0) {
          ++n_left;
          (row_label_[s] ? l1 : l0) += row_weight_[s];
        }
      }
      if (n_left == 0 || n_left == count) return false;
      if (n_left >= min_leaf_ && count - n_left >= min_leaf_) {
        const double d = decrease(m0, m1, l0, l1);
        if (d > best.decrease) best = {c, 0.5, d};
      }
      return true;
    }
    scratch_.clear();
    for (std::size_t i = lo; i < hi; ++i) {
      const auto s = static_cast<std::size_t>(samples_[i]);
      scratch_.push_back({X_.rows(static_cast<Eigen::Index>(s), c), s});
    }
    std::sort(scratch_.begin(), scratch_.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    if (scratch_.front().first == scratch_.back().first) return false;
    double l0 = 0.0, l1 = 0.0;
    for (std::size_t i = 0; i + 1 < scratch_.size(); ++i) {
      const auto s = scratch_[i].second;
      (row_label_[s] ? l1 : l0) += row_weight_[s];
      if (scratch_[i].first == scratch_[i + 1].first) continue;
      const std::size_t n_left = i + 1;
      if (n_left < min_leaf_ || count - n_left < min_leaf_) continue;
      const double d = decrease(m0, m1, l0, l1);
      if (d > best.decrease) {
        best = {c, 0.5 * (scratch_[i].first + scratch_[i + 1].first), d};
      }
    }
    return true;
  }

  Split best_split(std::size_t lo, std::size_t hi, double m0, double m1) {
    Split none;
    if (hi - lo < 2 * min_leaf_ || m0 <= 0.0 || m1 <= 0.0) return none;
    const int width = X_.width();
    order_.resize(static_cast<std::size_t>(width));
    std::iota(order_.begin(), order_.end(), 0);
    Split best;
    int scored = 0;
    for (int k = 0; k < width; ++k) {
      // partial Fisher-Yates: draw the next column lazily
      const auto pick = static_cast<std::size_t>(k) + rng_.below(static_cast<std::uint64_t>(width - k));
      std::swap(order_[static_cast<std::size_t>(k)], order_[pick]);
      if (score_column(order_[static_cast<std::size_t>(k)], lo, hi, m0, m1, best)) ++scored;
      if (scored >= mtry_ && best.column >= 0) break;
    }
    if (best.column < 0 || best.decrease <= 0.0 || best.decrease < params_.min_impurity_decrease)
      return none;
    return best;
  }

  std::size_t partition(std::size_t lo, std::size_t hi, const Split& split) {
    auto first = samples_.begin() + static_cast<std::ptrdiff_t>(lo);
    auto last = samples_.begin() + static_cast<std::ptrdiff_t>(hi);
    auto mid = std::stable_partition(first, last, [&](int s) {
      return X_.rows(s, split.column) <= split.threshold;
    });
    return static_cast<std::size_t>(mid - samples_.begin());
  }

  const DesignMatrix& X_;
  const ForestParams& params_;
  Rng& rng_;
  std::vector<bool> binary_;
  std::vector<double> row_weight_;
  std::vector<int> row_label_;
  std::vector<int> samples_;
  std::vector<int> order_;
  std::vector<std::pair<double, std::size_t>> scratch_;
  std::size_t min_leaf_ = 1;
  double total_mass_ = 0.0;
  int mtry_ = 1;
};

void check_params(const ForestParams& p) {
  require(p.n_trees >= 1, ErrorKind::Validation, "forest: n_trees must be >= 1");
  require(p.mtry >= 1, ErrorKind::Validation, "forest: mtry must be >= 1");
  require(p.min_samples_leaf_frac > 0.0 && p.min_samples_leaf_frac <= 1.0,
          ErrorKind::Validation, "forest: min_samples_leaf_frac must lie in (0, 1]");
  require(p.min_impurity_decrease >= 0.0, ErrorKind::Validation,
          "forest: min_impurity_decrease must be >= 0");
}

}  // namespace

Tree fit_tree(const DesignMatrix& X, const ClassWeights& weights, const ForestParams& params,
              Rng& rng, const TreeOptions& options) {
  require(X.size() > 0 && X.width() > 0, ErrorKind::Validation, "fit_tree: empty design");
  check_params(params);
  const auto n = static_cast<std::size_t>(X.size());
  std::vector<int> samples(n);
  if (options.bootstrap) {
    for (auto& s : samples) s = static_cast<int>(rng.below(n));
    std::sort(samples.begin(), samples.end());
  } else {
    std::iota(samples.begin(), samples.end(), 0);
  }
  TreeBuilder builder(X, weights, params, rng);
  return builder.build(std::move(samples));
}

ForestModel fit_forest(const DesignMatrix& X, const ClassWeights& weights,
                       const ForestParams& params, std::uint64_t seed) {
  check_params(params);
  if (params.mtry > X.width()) {
    std::clog << "forest: mtry " << params.mtry << " exceeds " << X.width()
              << " columns; using " << X.width() << "\n";
  }
  ForestModel model;
  model.schema = X.schema;
  model.params = params;
  model.seed = seed;
  model.trees.resize(static_cast<std::size_t>(params.n_trees));
  parallel_for(model.trees.size(), [&](std::size_t t) {
    Rng rng(seed, {0x7ee, static_cast<std::uint64_t>(t)});
    model.trees[t] = fit_tree(X, weights, params, rng);
  });
  return model;
}

double predict_row(const ForestModel& forest, const Eigen::Ref<const Vector>& x) {
  require(!forest.trees.empty(), ErrorKind::Validation, "predict_proba: empty forest");
  if (forest.schema) {
    require(x.size() == forest.schema->width(), ErrorKind::Dimension,
            "predict_row: row width " + std::to_string(x.size()) + " != forest width " +
                std::to_string(forest.schema->width()));
  }
  double sum = 0.0;
  for (const auto& t : forest.trees) sum += t.predict(x);
  return sum / static_cast<double>(forest.trees.size());
}

Vector predict_proba(const ForestModel& forest, const Matrix& rows) {
  Vector out(rows.rows());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) out[i] = predict_row(forest, rows.row(i).transpose());
  return out;
}

ForestGrid ForestGrid::full() {
  ForestGrid g;
  for (int t = 50; t <= 1000; t += 50) g.n_trees.push_back(t);
  g.mtry = {2, 6, 8, 10};
  g.min_samples_leaf_frac = {1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
  g.min_impurity_decrease = {1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
  return g;
}

ForestGrid ForestGrid::fast() {
  ForestGrid g;
  g.n_trees = {100};
  g.mtry = {6, 10};
  g.min_samples_leaf_frac = {1e-2, 1e-3};
  g.min_impurity_decrease = {1e-5};
  return g;
}

std::vector<ForestParams> ForestGrid::cells() const {
  std::vector<ForestParams> out;
  for (int t : n_trees)
    for (int m : mtry)
      for (double leaf : min_samples_leaf_frac)
        for (double imp : min_impurity_decrease) out.push_back({t, m, leaf, imp});
  return out;
}

ForestSearchResult grid_search_rf(const DesignMatrix& X, const ClassWeights& weights,
                                  int cv_folds, std::uint64_t seed, const ForestGrid& grid,
                                  int repetitions) {
  require(X.size() >= 2 * cv_folds, ErrorKind::Validation,
          "grid_search_rf: need at least 2 * cv_folds rows");
  ForestSearchResult result;
  for (const auto& params : grid.cells()) {
    GridCell cell{params, std::nullopt, {}};
    try {
      eval::Trainer trainer = [&](const DesignMatrix& train, const DesignMatrix& test,
                                  std::uint64_t fold_seed) {
        return predict_proba(fit_forest(train, weights, params, fold_seed), test.rows);
      };
      cell.report = eval::cross_validate(trainer, X, cv_folds, repetitions, seed, "RF");
    } catch (const Error& e) {
      cell.error = e.what();
    }
    result.cells.push_back(std::move(cell));
  }

  const GridCell* best = nullptr;
  for (const auto& cell : result.cells) {
    if (!cell.report) continue;
    if (best == nullptr) {
      best = &cell;
      continue;
    }
    const double a = cell.report->mean, b = best->report->mean;
    const auto& p = cell.params;
    const auto& q = best->params;
    const bool better = a > b || (a == b && (p.n_trees < q.n_trees ||
                                             (p.n_trees == q.n_trees &&
                                              p.min_samples_leaf_frac > q.min_samples_leaf_frac)));
    if (better) best = &cell;
  }
  require(best != nullptr, ErrorKind::Search, "grid_search_rf: every grid cell failed");
  result.best = best->params;
  result.report = *best->report;
  return result;
}

}  // namespace noshow::forest
