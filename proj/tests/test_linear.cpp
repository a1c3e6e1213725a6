#include <doctest.h>

#include <algorithm>

#include "helpers.hpp"
#include "noshow/linear_model.hpp"

using namespace noshow;
using namespace noshow::linear;

namespace {

struct Small {
  Matrix X;
  Vector y;
};

Small small_problem(Rng& rng, int n, int N) {
  Small s{Matrix(n, N), Vector(n)};
  for (int i = 0; i < n; ++i) {
    double z = 0.3;
    for (int j = 0; j < N; ++j) {
      s.X(i, j) = rng.bernoulli(0.5) ? 1.0 : rng.uniform(-1.0, 1.0);
      z += (j == 0 ? 1.2 : -0.7) * s.X(i, j);
    }
    s.y[i] = rng.bernoulli(1.0 / (1.0 + std::exp(-z)));
  }
  s.y[0] = 1.0;
  s.y[1] = 0.0;
  return s;
}

// Objective minimised over the unpenalized intercept by Newton steps.
double profile(const Small& s, const ClassWeights& w, double lambda, const Vector& beta) {
  const Vector base = s.X * beta;
  double b0 = 0.0;
  for (int it = 0; it < 60; ++it) {
    double g = 0.0, h = 0.0;
    for (Eigen::Index i = 0; i < base.size(); ++i) {
      const double wi = w.of(s.y[i] > 0.5);
      const double p = sigmoid(base[i] + b0);
      g += wi * (p - s.y[i]);
      h += wi * p * (1 - p);
    }
    b0 -= g / std::max(h, 1e-300);
    if (std::abs(g) < 1e-15) break;
  }
  double loss = 0.0;
  for (Eigen::Index i = 0; i < base.size(); ++i) {
    const double eta = base[i] + b0;
    loss += w.of(s.y[i] > 0.5) * (softplus(eta) - s.y[i] * eta);
  }
  return loss / static_cast<double>(base.size()) + lambda * beta.lpNorm<1>();
}

// Dense grid over [-5,5]^N, refined by repeatedly zooming around the best
// cell; convexity keeps the minimum inside the zoomed window.
double grid_oracle(const Small& s, const ClassWeights& w, double lambda) {
  const auto N = s.X.cols();
  Vector centre = Vector::Zero(N);
  double half = 5.0;
  double best = std::numeric_limits<double>::infinity();
  const int steps = 20;
  for (int round = 0; round < 30; ++round) {
    Vector arg = centre;
    const int total = N == 1 ? steps + 1 : (steps + 1) * (steps + 1);
    for (int k = 0; k < total; ++k) {
      Vector b(N);
      b[0] = centre[0] - half + 2 * half * (k % (steps + 1)) / steps;
      if (N == 2) b[1] = centre[1] - half + 2 * half * (k / (steps + 1)) / steps;
      b = b.cwiseMax(-5.0).cwiseMin(5.0);
      // the kinks at zero are candidates too
      for (int mask = 0; mask < (1 << N); ++mask) {
        Vector c = b;
        for (Eigen::Index j = 0; j < N; ++j)
          if (mask >> j & 1) c[j] = 0.0;
        const double f = profile(s, w, lambda, c);
        if (f < best) {
          best = f;
          arg = c;
        }
      }
    }
    centre = arg;
    half *= 0.3;
  }
  return best;
}

data::DesignMatrix synthetic_design(int n, std::uint64_t seed, Vector* truth) {
  Rng rng(seed);
  const int N = 8;
  *truth = Vector::Zero(N);
  (*truth)[0] = 1.0;
  (*truth)[1] = -0.8;
  (*truth)[2] = 0.6;
  Matrix X(n, N);
  Vector y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < N; ++j) X(i, j) = rng.bernoulli(0.5);
    y[i] = rng.bernoulli(sigmoid(-0.5 + X.row(i).dot(*truth)));
  }
  return testkit::design(X, y);
}

}  // namespace

TEST_CASE("penalty grid") {
  const auto g = penalty_grid();
  REQUIRE(g.size() == 30);
  CHECK(g[0] == doctest::Approx(0.01));
  CHECK(g[9] == doctest::Approx(0.1));
  CHECK(g[10] == doctest::Approx(0.19));
  CHECK(g[19] == doctest::Approx(1.0));
  CHECK(g[20] == doctest::Approx(1.9));
  CHECK(g[29] == doctest::Approx(10.0));
  CHECK(std::is_sorted(g.begin(), g.end()));
}

TEST_CASE("solver reaches the grid-search optimum on tiny problems") {
  Rng rng(31);
  for (int t = 0; t < 12; ++t) {
    const int n = 10 + static_cast<int>(rng.below(41));
    const int N = 1 + static_cast<int>(rng.below(2));
    const Small s = small_problem(rng, n, N);
    const double lambda = 0.005 + 0.2 * rng.uniform();
    const ClassWeights w = t % 2 ? data::class_weights(s.y) : ClassWeights{};
    const auto X = testkit::design(s.X, s.y);
    const auto m = fit_l1_logistic(X, lambda, w, {1e-12, 100000, 1e-9});
    const double solver = objective(X, w, lambda, m.intercept, m.coefficients);
    const double oracle = grid_oracle(s, w, lambda);
    CHECK(solver <= oracle + 1e-9);
    if (m.coefficients.cwiseAbs().maxCoeff() <= 5.0) CHECK(std::abs(solver - oracle) <= 1e-6);
  }
}

TEST_CASE("objective never increases and the solution satisfies the optimality conditions") {
  Vector truth;
  const auto X = synthetic_design(600, 3, &truth);
  const ClassWeights w = data::class_weights(X.labels);
  for (double lambda : {0.002, 0.02, 0.2}) {
    SolverTrace trace;
    const auto m = fit_l1_logistic(X, lambda, w, {}, nullptr, &trace);
    for (std::size_t i = 1; i < trace.objective.size(); ++i)
      CHECK(trace.objective[i] <= trace.objective[i - 1] + 1e-15);
    const Vector g = smooth_gradient(X, w, m.intercept, m.coefficients);
    CHECK(std::abs(g[0]) <= 1e-5);
    for (Eigen::Index j = 0; j < m.coefficients.size(); ++j) {
      const double b = m.coefficients[j], gj = g[j + 1];
      if (b == 0.0) CHECK(std::abs(gj) <= lambda + 1e-5);
      else CHECK(std::abs(gj + (b > 0 ? lambda : -lambda)) <= 1e-5);
    }
    CHECK(kkt_violation(X, w, m) <= 1e-5);
  }
}

TEST_CASE("large penalty zeroes everything; invalid penalty rejected") {
  Vector truth;
  const auto X = synthetic_design(300, 5, &truth);
  const auto m = fit_l1_logistic(X, 10.0, {});
  CHECK(m.n_nonzero() == 0);
  const double rate = X.labels.mean();
  CHECK(sigmoid(m.intercept) == doctest::Approx(rate).epsilon(1e-5));
  CHECK_THROWS_AS(fit_l1_logistic(X, 0.0, {}), Error);
  CHECK_THROWS_AS(fit_l1_logistic(X, -1.0, {}), Error);
}

TEST_CASE("iteration budget raises a convergence error carrying the objective") {
  Vector truth;
  const auto X = synthetic_design(300, 6, &truth);
  try {
    fit_l1_logistic(X, 0.001, {}, {1e-14, 3, 1e-12});
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(std::isfinite(e.last_objective()));
    CHECK(e.kind() == ErrorKind::Convergence);
  }
}

TEST_CASE("warm start reaches the same solution") {
  Vector truth;
  const auto X = synthetic_design(500, 7, &truth);
  const auto cold = fit_l1_logistic(X, 0.01, {}, {1e-12, 100000, 1e-9});
  const auto start = fit_l1_logistic(X, 0.05, {});
  const auto warm = fit_l1_logistic(X, 0.01, {}, {1e-12, 100000, 1e-9}, &start);
  CHECK((cold.coefficients - warm.coefficients).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("penalty path and selection") {
  Vector truth;
  const auto X = synthetic_design(1500, 9, &truth);
  const ClassWeights w = data::class_weights(X.labels);
  const auto path = penalty_path(X, w, 3, 1);
  REQUIRE(path.entries.size() == 30);
  CHECK(path.entries.back().n_nonzero == 0.0);
  const double chosen = select_penalty(path);
  double best = 0;
  for (const auto& e : path.entries) best = std::max(best, e.mean_cv_auroc);
  const auto it = std::find_if(path.entries.begin(), path.entries.end(), [&](const PathEntry& e) { return e.lambda == chosen; });
  REQUIRE(it != path.entries.end());
  CHECK(it->mean_cv_auroc >= best - 0.005 - 1e-12);
  for (const auto& e : path.entries)
    if (e.mean_cv_auroc >= best - 0.005) CHECK(e.n_nonzero >= it->n_nonzero);

  const auto again = penalty_path(X, w, 3, 1);
  for (std::size_t k = 0; k < 30; ++k) CHECK(again.entries[k].mean_cv_auroc == path.entries[k].mean_cv_auroc);
}

TEST_CASE("select_penalty ties go to the larger penalty") {
  PenaltyPath p;
  p.entries = {{0.1, 0.70, 0, 3}, {0.2, 0.80, 0, 2}, {0.3, 0.797, 0, 2}, {0.4, 0.78, 0, 1}};
  CHECK(select_penalty(p) == 0.3);
  CHECK(select_penalty(p, 0.05) == 0.4);
  CHECK_THROWS_AS(select_penalty(PenaltyPath{}), Error);
}

TEST_CASE("odds ratios are geometric means of per-model ratios") {
  const auto r = testkit::random_records(200, 2);
  const auto X = data::encode(r, {data::table_age_bands(), data::table_lead_time_bands()}, true);
  Rng rng(3);
  std::vector<FittedLinearModel> models(4);
  for (auto& m : models) {
    m.schema = X.schema;
    m.coefficients = Vector(X.width());
    for (Eigen::Index j = 0; j < m.coefficients.size(); ++j) m.coefficients[j] = rng.uniform(-2, 2);
  }
  const auto table = odds_ratios(models);
  REQUIRE(table.rows.size() == static_cast<std::size_t>(X.width()));
  for (std::size_t j = 0; j < table.rows.size(); ++j) {
    double product = 1.0;
    for (const auto& m : models) product *= std::exp(m.coefficients[static_cast<Eigen::Index>(j)]);
    CHECK(std::abs(table.rows[j].odds_ratio - std::pow(product, 0.25)) <= 1e-12 * table.rows[j].odds_ratio);
    CHECK(table.rows[j].column_name == X.schema->column_names()[j]);
  }
  auto other = models;
  other[1].schema = std::make_shared<const data::FeatureSchema>();
  CHECK_THROWS_AS(odds_ratios(other), Error);
}
