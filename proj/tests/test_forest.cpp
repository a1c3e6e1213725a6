#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "helpers.hpp"
#include "noshow/forest.hpp"

using namespace noshow;
using namespace noshow::forest;

namespace {

double oracle_gini(double a, double b) {
  const double t = a + b;
  return 1.0 - (a / t) * (a / t) - (b / t) * (b / t);
}

struct Problem {
  const Matrix& X;
  const Vector& y;
  ClassWeights w;
  std::size_t min_leaf;
  double total;
};

std::pair<double, double> masses(const Problem& p, const std::vector<int>& rows) {
  double m0 = 0, m1 = 0;
  for (int r : rows) (p.y[r] > 0.5 ? m1 : m0) += p.w.of(p.y[r] > 0.5);
  return {m0, m1};
}

double split_decrease(const Problem& p, const std::vector<int>& rows, int c, double thr) {
  const auto [m0, m1] = masses(p, rows);
  double l0 = 0, l1 = 0;
  std::size_t nl = 0;
  for (int r : rows)
    if (p.X(r, c) <= thr) {
      ++nl;
      (p.y[r] > 0.5 ? l1 : l0) += p.w.of(p.y[r] > 0.5);
    }
  if (nl < p.min_leaf || rows.size() - nl < p.min_leaf) return -1.0;
  const double mt = m0 + m1, r0 = m0 - l0, r1 = m1 - l1;
  return mt / p.total *
         (oracle_gini(m0, m1) - (l0 + l1) / mt * oracle_gini(l0, l1) - (r0 + r1) / mt * oracle_gini(r0, r1));
}

// Best decrease over every column and every midpoint between distinct values.
double best_decrease(const Problem& p, const std::vector<int>& rows) {
  const auto [m0, m1] = masses(p, rows);
  if (rows.size() < 2 * p.min_leaf || m0 <= 0 || m1 <= 0) return -1.0;
  double best = -1.0;
  for (int c = 0; c < p.X.cols(); ++c) {
    std::vector<double> values;
    for (int r : rows) values.push_back(p.X(r, c));
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t k = 0; k + 1 < values.size(); ++k)
      best = std::max(best, split_decrease(p, rows, c, 0.5 * (values[k] + values[k + 1])));
  }
  return best;
}

// Walks the fitted tree and checks every node against exhaustive enumeration:
// internal nodes carry an optimal split, leaves admit no improving split.
// Equal-gain alternatives are interchangeable, so the walk follows the
// tree's own choice.
void verify(const Problem& p, const Tree& tree, int node, const std::vector<int>& rows) {
  const TreeNode& t = tree.nodes[static_cast<std::size_t>(node)];
  const auto [m0, m1] = masses(p, rows);
  CHECK(t.mass_show == doctest::Approx(m0).epsilon(1e-12));
  CHECK(t.mass_no_show == doctest::Approx(m1).epsilon(1e-12));
  const double best = best_decrease(p, rows);
  if (t.is_leaf()) {
    CHECK(best <= 0.0);
    return;
  }
  CHECK(split_decrease(p, rows, t.column, t.threshold) == doctest::Approx(best).epsilon(1e-12));
  std::vector<int> lrows, rrows;
  for (int r : rows) (p.X(r, t.column) <= t.threshold ? lrows : rrows).push_back(r);
  verify(p, tree, t.left, lrows);
  verify(p, tree, t.right, rrows);
}

data::DesignMatrix one_hot_design(std::size_t n, std::uint64_t seed) {
  const auto r = testkit::random_records(n, seed);
  return data::encode(r, {data::table_age_bands(), data::table_lead_time_bands()}, false);
}

}  // namespace

TEST_CASE("gini") {
  CHECK(gini(1.0, 1.0) == 0.5);
  CHECK(gini(3.0, 0.0) == 0.0);
  CHECK(gini(1.0, 3.0) == doctest::Approx(0.375));
  CHECK(gini(2.0, 6.0) == gini(1.0, 3.0));
  CHECK_THROWS_AS(gini(0.0, 0.0), Error);
}

TEST_CASE("unit weights reproduce unweighted gini exactly") {
  Rng rng(1);
  for (int t = 0; t < 100; ++t) {
    const auto a = static_cast<double>(rng.below(50)), b = static_cast<double>(1 + rng.below(50));
    const ClassWeights w{1.0, 1.0};
    const double weighted = gini(a * w.w_show, b * w.w_no_show);
    const double p = b / (a + b);
    CHECK(weighted == gini(a, b));
    CHECK(std::abs(weighted - 2 * p * (1 - p)) < 1e-15);
  }
}

TEST_CASE("single tree without bootstrap matches exhaustive CART") {
  Rng gen(5);
  for (int t = 0; t < 40; ++t) {
    const int n = 6 + static_cast<int>(gen.below(25));
    const int N = 1 + static_cast<int>(gen.below(3));
    Matrix X(n, N);
    Vector y(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < N; ++j) X(i, j) = t % 3 == 0 ? static_cast<double>(gen.below(3)) : gen.uniform();
      y[i] = gen.bernoulli(0.4);
    }
    y[0] = 1;
    y[1] = 0;
    const auto D = testkit::design(X, y);
    const ClassWeights w = t % 2 ? data::class_weights(y) : ClassWeights{};
    const ForestParams params{1, N, 0.05, 0.0};
    Rng rng(t);
    const Tree tree = fit_tree(D, w, params, rng, {false});

    std::vector<int> rows(static_cast<std::size_t>(n));
    std::iota(rows.begin(), rows.end(), 0);
    const auto min_leaf = static_cast<std::size_t>(std::max(1.0, std::ceil(0.05 * n - 1e-9)));
    double total = 0;
    for (int i = 0; i < n; ++i) total += w.of(y[i] > 0.5);
    verify(Problem{X, y, w, min_leaf, total}, tree, 0, rows);
  }
}

TEST_CASE("leaf size and impurity floors are respected") {
  const auto X = one_hot_design(500, 2);
  const ClassWeights w = data::class_weights(X.labels);
  Rng rng(3);
  const Tree tree = fit_tree(X, w, {1, 6, 0.05, 1e-4}, rng, {false});
  std::vector<int> count(tree.nodes.size(), 0);
  for (Eigen::Index i = 0; i < X.size(); ++i) {
    const TreeNode* leaf = &tree.leaf_for(X.rows.row(i).transpose());
    ++count[static_cast<std::size_t>(leaf - tree.nodes.data())];
  }
  for (std::size_t k = 0; k < tree.nodes.size(); ++k)
    if (tree.nodes[k].is_leaf()) CHECK(count[k] >= 25);

  Rng rng2(3);
  const Tree stump = fit_tree(X, w, {1, 6, 0.05, 1.0}, rng2, {false});
  CHECK(stump.nodes.size() == 1);
  CHECK(stump.predict(X.rows.row(0).transpose()) == doctest::Approx(0.5));
}

TEST_CASE("forest determinism, tree order invariance and probability range") {
  const auto X = one_hot_design(400, 4);
  const ClassWeights w = data::class_weights(X.labels);
  const ForestParams p{15, 4, 0.01, 1e-5};
  const ForestModel a = fit_forest(X, w, p, 77);
  const ForestModel b = fit_forest(X, w, p, 77);
  CHECK(a.trees == b.trees);
  const Vector pa = predict_proba(a, X.rows);
  CHECK(pa == predict_proba(b, X.rows));
  CHECK((pa.array() >= 0.0).all());
  CHECK((pa.array() <= 1.0).all());

  ForestModel reversed = a;
  std::reverse(reversed.trees.begin(), reversed.trees.end());
  const Vector pr = predict_proba(reversed, X.rows);
  CHECK((pa - pr).cwiseAbs().maxCoeff() <= 1e-15);

  const ForestModel c = fit_forest(X, w, p, 78);
  CHECK_FALSE(c.trees == a.trees);
}

TEST_CASE("mtry above the width is clamped") {
  const auto X = one_hot_design(200, 6);
  const ForestParams p{3, 10'000, 0.01, 1e-5};
  ForestModel f;
  CHECK_NOTHROW(f = fit_forest(X, {}, p, 1));
  CHECK(f.trees.size() == 3);
  CHECK_THROWS_AS(fit_forest(X, {}, {0, 2, 0.01, 0.0}, 1), Error);
  CHECK_THROWS_AS(fit_forest(X, {}, {2, 0, 0.01, 0.0}, 1), Error);
  CHECK_THROWS_AS(fit_forest(X, {}, {2, 2, 0.0, 0.0}, 1), Error);
}

TEST_CASE("width mismatch is a dimension error") {
  const auto X = one_hot_design(100, 8);
  const ForestModel f = fit_forest(X, {}, {2, 3, 0.05, 1e-5}, 1);
  CHECK_THROWS_AS(predict_row(f, Vector::Zero(X.width() + 1)), Error);
}

TEST_CASE("forest grids") {
  const auto full = ForestGrid::full().cells();
  CHECK(full.size() == 2000);
  CHECK(full.front().n_trees == 50);
  CHECK(full.back().n_trees == 1000);
  const ForestGrid g = ForestGrid::full();
  CHECK(g.mtry == std::vector<int>{2, 6, 8, 10});
  CHECK(g.min_samples_leaf_frac.size() == 5);

  const auto X = one_hot_design(300, 9);
  ForestGrid small;
  small.n_trees = {5, 10};
  small.mtry = {3};
  small.min_samples_leaf_frac = {0.02};
  small.min_impurity_decrease = {1e-5};
  const auto res = grid_search_rf(X, data::class_weights(X.labels), 3, 4, small);
  REQUIRE(res.cells.size() == 2);
  double best = 0;
  for (const auto& c : res.cells) best = std::max(best, c.report->mean);
  CHECK(res.report.mean == best);
  const auto again = grid_search_rf(X, data::class_weights(X.labels), 3, 4, small);
  CHECK(again.report.fold_scores == res.report.fold_scores);
}
