#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "helpers.hpp"
#include "noshow/evaluation.hpp"

using namespace noshow;
using namespace noshow::eval;

namespace {

std::vector<ScoredRecord> scored(const std::vector<double>& s) {
  std::vector<ScoredRecord> out;
  for (std::size_t i = 0; i < s.size(); ++i) out.push_back({static_cast<RecordId>(i + 1), s[i]});
  return out;
}

std::array<std::int64_t, 3> sizes(const std::map<RecordId, Group>& g) {
  std::array<std::int64_t, 3> out{};
  for (const auto& [id, grp] : g) ++out[static_cast<std::size_t>(grp)];
  return out;
}

}  // namespace

TEST_CASE("auroc small cases") {
  CHECK(auroc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<int>{0, 0, 1, 1}) == 0.75);
  CHECK(auroc(std::vector<double>{0.5, 0.5, 0.5}, std::vector<int>{0, 1, 0}) == 0.5);
  CHECK(auroc(std::vector<double>{1, 2, 3}, std::vector<int>{0, 0, 1}) == 1.0);
  CHECK(auroc(std::vector<double>{3, 2, 1}, std::vector<int>{0, 0, 1}) == 0.0);
  CHECK_THROWS_AS(auroc(std::vector<double>{1, 2}, std::vector<int>{1, 1}), Error);
  CHECK_THROWS_AS(auroc(std::vector<double>{1, 2}, std::vector<int>{1}), Error);
}

TEST_CASE("auroc matches pairwise counting and ignores monotone transforms") {
  Rng rng(11);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 2 + rng.below(300);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.below(20)) / 7.0;
      y[i] = rng.bernoulli(0.3);
    }
    y[0] = 1;
    y[1] = 0;
    const double a = auroc(s, y);
    CHECK(std::abs(a - testkit::pairwise_auroc(s, y)) <= 1e-12);
    std::vector<double> t2(n);
    std::transform(s.begin(), s.end(), t2.begin(), [](double v) { return std::exp(3 * v) - 7; });
    CHECK(auroc(t2, y) == doctest::Approx(a).epsilon(1e-15));
  }
}

TEST_CASE("stratified folds balance classes") {
  std::vector<int> y(103, 0);
  std::fill(y.begin(), y.begin() + 31, 1);
  const auto a = stratified_folds(y, 10, 5);
  CHECK(a == stratified_folds(y, 10, 5));
  for (int f = 0; f < 10; ++f) {
    int pos = 0, neg = 0;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (a[i] == f) (y[i] ? pos : neg)++;
    CHECK((pos == 3 || pos == 4));
    CHECK((neg == 7 || neg == 8));
  }
}

TEST_CASE("cross validation report shape and determinism") {
  const auto r = testkit::random_records(400, 3);
  const auto X = data::encode(r, {data::table_age_bands(), data::table_lead_time_bands()}, false);
  Trainer trainer = [](const DesignMatrix& train, const DesignMatrix& test, std::uint64_t seed) {
    // column mean of positives as a linear score, plus seed noise
    Vector w = Vector::Zero(train.width());
    for (Eigen::Index i = 0; i < train.size(); ++i)
      w += (train.labels[i] > 0.5 ? 1.0 : -1.0) * train.rows.row(i).transpose();
    Rng rng(seed);
    Vector s = test.rows * w;
    for (Eigen::Index i = 0; i < s.size(); ++i) s[i] += 1e-3 * rng.uniform();
    return s;
  };
  const CvReport a = cross_validate(trainer, X, 5, 3, 9, "ALL/LR");
  const CvReport b = cross_validate(trainer, X, 5, 3, 9, "ALL/LR");
  CHECK(a.fold_scores.size() == 15);
  CHECK(a.fold_scores == b.fold_scores);
  CHECK(a.model_tag == "ALL/LR");
  const double mean = std::accumulate(a.fold_scores.begin(), a.fold_scores.end(), 0.0) / 15.0;
  double var = 0.0;
  for (double s : a.fold_scores) var += (s - mean) * (s - mean);
  CHECK(a.mean == doctest::Approx(mean).epsilon(1e-12));
  CHECK(a.std == doctest::Approx(std::sqrt(var / 15.0)).epsilon(1e-12));

  Trainer broken = [](const DesignMatrix&, const DesignMatrix& test, std::uint64_t) {
    if (test.size() > 0) throw Error(ErrorKind::Convergence, "nope");
    return Vector();
  };
  try {
    cross_validate(broken, X, 5, 2, 1);
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("fold") != std::string::npos);
  }
}

TEST_CASE("cut-off tuning follows the ceiling rule") {
  Rng rng(2);
  std::vector<double> s(53311);
  for (auto& v : s) v = rng.uniform();
  const auto sc = scored(s);
  const CutoffPolicy p = tune_cutoffs(sc, {0.3, 0.4, 0.3});
  const auto g = sizes(assign_groups(sc, p));
  CHECK(g[0] == 15994);
  CHECK(g[1] == 21324);
  CHECK(g[2] == 15993);

  CHECK_THROWS_AS(tune_cutoffs(sc, {0.3, 0.4, 0.4}), Error);
  CHECK_THROWS_AS(tune_cutoffs(sc, {-0.1, 0.8, 0.3}), Error);
  CHECK_THROWS_AS(tune_cutoffs(std::vector<ScoredRecord>{}, {0.3, 0.4, 0.3}), Error);
}

TEST_CASE("group sizes are exact for any score multiset, including ties") {
  Rng rng(21);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + rng.below(400);
    std::vector<double> s(n);
    for (auto& v : s) v = static_cast<double>(rng.below(1 + rng.below(6)));
    const auto ta = rng.below(11);
    const auto tb = rng.below(11 - ta);
    const double fa = ta / 10.0, fb = tb / 10.0;
    const Fractions f{fa, fb, (10 - ta - tb) / 10.0};
    const auto sc = scored(s);
    const auto g = sizes(assign_groups(sc, tune_cutoffs(sc, f)));
    const auto na = static_cast<std::int64_t>(std::ceil(fa * static_cast<double>(n) - 1e-9));
    const auto nab = static_cast<std::int64_t>(std::ceil((fa + fb) * static_cast<double>(n) - 1e-9));
    CHECK(g[0] == na);
    CHECK(g[0] + g[1] == nab);
    CHECK(g[0] + g[1] + g[2] == static_cast<std::int64_t>(n));
  }
}

TEST_CASE("assignment is monotone in score") {
  Rng rng(4);
  std::vector<double> s(500);
  for (auto& v : s) v = rng.uniform();
  const auto sc = scored(s);
  const auto g = assign_groups(sc, tune_cutoffs(sc, {0.2, 0.5, 0.3}));
  for (const auto& a : sc)
    for (const auto& b : sc)
      if (a.score < b.score) CHECK(g.at(a.record_id) <= g.at(b.record_id));
}

TEST_CASE("coverage and risk") {
  const std::map<RecordId, Group> g{{1, Group::A}, {2, Group::A}, {3, Group::B}, {4, Group::C}, {5, Group::C}};
  const std::map<RecordId, int> y{{1, 1}, {2, 0}, {3, 1}, {4, 1}, {5, 1}};
  const auto m = coverage_risk(g, y);
  CHECK(m.coverage == 0.5);
  CHECK(m.risk == 0.25);
  CHECK(m.group_sizes == std::array<std::int64_t, 3>{2, 1, 2});
  CHECK(m.no_show_counts == std::array<std::int64_t, 3>{1, 1, 2});

  const std::map<RecordId, int> none{{1, 0}, {2, 0}, {3, 0}, {4, 0}, {5, 0}};
  CHECK_THROWS_AS(coverage_risk(g, none), Error);
}

TEST_CASE("coverage, risk and the B share sum to one and coverage grows with f_C") {
  Rng rng(8);
  for (int t = 0; t < 30; ++t) {
    const std::size_t n = 50 + rng.below(300);
    std::vector<double> s(n);
    std::map<RecordId, int> y;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.below(30));
      y[static_cast<RecordId>(i + 1)] = rng.bernoulli(0.3);
    }
    y[1] = 1;
    const auto sc = scored(s);
    double last = -1.0;
    for (int c = 0; c <= 10; ++c) {
      const double fc = c / 10.0;
      const Fractions f{(1.0 - fc) / 2.0, (1.0 - fc) / 2.0, fc};
      const auto m = coverage_risk(assign_groups(sc, tune_cutoffs(sc, f)), y);
      const double total = static_cast<double>(m.no_show_counts[0] + m.no_show_counts[1] + m.no_show_counts[2]);
      CHECK(m.coverage + m.risk + static_cast<double>(m.no_show_counts[1]) / total == doctest::Approx(1.0).epsilon(1e-15));
      CHECK(m.coverage >= last);
      last = m.coverage;
    }
  }
}

TEST_CASE("fractions parsing") {
  const Fractions f = parse_fractions("0.2,0.5,0.3");
  CHECK(f.a == 0.2);
  CHECK(f.b == 0.5);
  CHECK(f.c == 0.3);
  CHECK_THROWS_AS(parse_fractions("0.2,0.5"), Error);
  CHECK_THROWS_AS(parse_fractions("a,b,c"), Error);
}

TEST_CASE("comparison table renders published rows") {
  struct Cell {
    const char* service;
    const char* model;
    double risk, coverage;
  };
  const Cell cells[] = {
      {"OH", "NN", 0.02, 0.70},  {"OH", "RF", 0.09, 0.55},  {"OH", "LR", 0.17, 0.39},
      {"G&D", "NN", 0.02, 0.80}, {"G&D", "RF", 0.03, 0.64}, {"G&D", "LR", 0.17, 0.41},
      {"YAP", "NN", 0.03, 0.67}, {"YAP", "RF", 0.09, 0.55}, {"YAP", "LR", 0.20, 0.41},
      {"SP", "NN", 0.02, 0.75},  {"SP", "RF", 0.06, 0.61},  {"SP", "LR", 0.21, 0.40},
  };
  std::vector<CvReport> reports;
  std::vector<InterventionMetrics> metrics;
  for (const auto& c : cells) {
    const std::string tag = std::string(c.service) + "/" + c.model;
    reports.push_back(CvReport::from_scores(tag, 2, 1, {0.8, 0.9}));
    InterventionMetrics m;
    m.model_tag = tag;
    m.risk = c.risk;
    m.coverage = c.coverage;
    metrics.push_back(m);
  }
  std::reverse(metrics.begin(), metrics.end());
  const auto table = compare_models(reports, metrics);
  const auto rows = table.render_rows();
  REQUIRE(rows.size() == 12);
  CHECK(rows[0] == "OH | NN | 2% | 70%");
  CHECK(rows[5] == "G&D | LR | 17% | 41%");
  CHECK(rows[9] == "SP | NN | 2% | 75%");
  CHECK(rows[11] == "SP | LR | 21% | 40%");
  CHECK(table.rows[0].mean_auroc == doctest::Approx(0.85));

  metrics.pop_back();
  CHECK_THROWS_AS(compare_models(reports, metrics), Error);
}
