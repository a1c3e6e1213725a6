#include "noshow/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "noshow/parallel.hpp"
#include "noshow/rng.hpp"

namespace noshow::eval {

double auroc(std::span<const double> scores, std::span<const int> labels) {
  require(scores.size() == labels.size(), ErrorKind::Metric, "auroc: length mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double n_pos = 0.0, rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    // ranks i+1..j share their average, (i + 1 + j) / 2
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        n_pos += 1.0;
        rank_sum += avg_rank;
      }
    }
    i = j;
  }
  const double n_neg = static_cast<double>(n) - n_pos;
  require(n_pos > 0.0 && n_neg > 0.0, ErrorKind::Metric,
          "auroc: both classes must be present");
  const double u = rank_sum - n_pos * (n_pos + 1.0) / 2.0;
  return u / (n_pos * n_neg);
}

std::vector<int> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed) {
  require(folds >= 2, ErrorKind::Validation, "need at least two folds");
  Rng rng(seed, {0xf01d});
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(i);
  rng.shuffle(std::span(pos));
  rng.shuffle(std::span(neg));
  std::vector<int> out(labels.size(), 0);
  std::size_t deal = 0;
  for (const auto* cls : {&neg, &pos}) {
    for (std::size_t i : *cls) out[i] = static_cast<int>(deal++ % static_cast<std::size_t>(folds));
  }
  return out;
}

std::vector<int> stratified_folds(const Vector& labels, int folds, std::uint64_t seed) {
  std::vector<int> y(static_cast<std::size_t>(labels.size()));
  for (Eigen::Index i = 0; i < labels.size(); ++i) y[static_cast<std::size_t>(i)] = labels[i] > 0.5;
  return stratified_folds(y, folds, seed);
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> fold_indices(
    std::span<const int> assignment, int fold) {
  std::vector<std::size_t> train, test;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    (assignment[i] == fold ? test : train).push_back(i);
  }
  return {std::move(train), std::move(test)};
}

CvReport CvReport::from_scores(std::string tag, int folds, int repetitions,
                               std::vector<double> scores) {
  CvReport r;
  r.model_tag = std::move(tag);
  r.folds = folds;
  r.repetitions = repetitions;
  r.fold_scores = std::move(scores);
  const double n = static_cast<double>(r.fold_scores.size());
  if (n > 0) {
    r.mean = std::accumulate(r.fold_scores.begin(), r.fold_scores.end(), 0.0) / n;
    double ss = 0.0;
    for (double s : r.fold_scores) ss += (s - r.mean) * (s - r.mean);
    r.std = std::sqrt(ss / n);
  }
  return r;
}

CvReport cross_validate(const Trainer& trainer, const DesignMatrix& X, int folds,
                        int repetitions, std::uint64_t seed, const std::string& model_tag) {
  require(folds >= 2 && repetitions >= 1, ErrorKind::Validation,
          "cross_validate: folds >= 2 and repetitions >= 1 required");
  require(X.size() >= 2 * folds, ErrorKind::Validation,
          "cross_validate: need at least 2 * folds rows");
  const auto n_pos = static_cast<int>((X.labels.array() > 0.5).count());
  require(n_pos >= folds && X.size() - n_pos >= folds, ErrorKind::Metric,
          "cross_validate: each class needs at least one row per fold");

  std::vector<std::vector<int>> assignments(static_cast<std::size_t>(repetitions));
  for (int r = 0; r < repetitions; ++r) {
    assignments[static_cast<std::size_t>(r)] =
        stratified_folds(X.labels, folds, substream_seed(seed, {static_cast<std::uint64_t>(r)}));
  }
  const auto cells = static_cast<std::size_t>(folds * repetitions);
  std::vector<double> scores(cells);
  parallel_for(cells, [&](std::size_t cell) {
    const int r = static_cast<int>(cell) / folds;
    const int f = static_cast<int>(cell) % folds;
    try {
      auto [train_idx, test_idx] = fold_indices(assignments[static_cast<std::size_t>(r)], f);
      const DesignMatrix train = X.subset(train_idx);
      const DesignMatrix test = X.subset(test_idx);
      const Vector s = trainer(train, test,
                               substream_seed(seed, {static_cast<std::uint64_t>(r),
                                                     static_cast<std::uint64_t>(f), 0x7a1}));
      require(s.size() == test.size(), ErrorKind::Dimension,
              "trainer returned a wrong number of scores");
      scores[cell] = auroc(s, test.labels);
    } catch (const Error& e) {
      throw Error(e.kind(), "repetition " + std::to_string(r) + " fold " + std::to_string(f) +
                                ": " + e.what());
    }
  });
  return CvReport::from_scores(model_tag, folds, repetitions, std::move(scores));
}

char to_char(Group g) { return g == Group::A ? 'A' : g == Group::B ? 'B' : 'C'; }

Fractions parse_fractions(const std::string& text) {
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(item, &used));
      require(used == item.size(), ErrorKind::Policy, "unparsable fraction '" + item + "'");
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::Policy, "unparsable fraction '" + item + "'");
    }
  }
  require(parts.size() == 3, ErrorKind::Policy, "fractions must be three values a,b,c");
  return {parts[0], parts[1], parts[2]};
}

namespace {

void check_fractions(const Fractions& f) {
  for (double x : {f.a, f.b, f.c}) {
    require(std::isfinite(x) && x >= 0.0, ErrorKind::Policy, "fractions must be non-negative");
  }
  require(std::abs(f.a + f.b + f.c - 1.0) <= 1e-9, ErrorKind::Policy,
          "fractions must sum to 1");
}

std::size_t ceil_count(double fraction, std::size_t n) {
  // the epsilon absorbs representation error such as 0.3 * 10 = 3.0000000000000004
  const double x = std::ceil(fraction * static_cast<double>(n) - 1e-9);
  return std::min(n, static_cast<std::size_t>(std::max(0.0, x)));
}

}  // namespace

CutoffPolicy tune_cutoffs(std::span<const ScoredRecord> scores, const Fractions& fractions) {
  check_fractions(fractions);
  require(!scores.empty(), ErrorKind::Policy, "tune_cutoffs: no scores");
  std::vector<ScoredRecord> sorted(scores.begin(), scores.end());
  for (const auto& s : sorted) {
    require(std::isfinite(s.score), ErrorKind::Policy, "tune_cutoffs: non-finite score");
  }
  std::sort(sorted.begin(), sorted.end(), [](const ScoredRecord& x, const ScoredRecord& y) {
    return x.score < y.score || (x.score == y.score && x.record_id < y.record_id);
  });
  const std::size_t n = sorted.size();
  const std::size_t k1 = ceil_count(fractions.a, n);
  const std::size_t k2 = std::max(k1, ceil_count(fractions.a + fractions.b, n));

  auto boundary = [&](std::size_t k) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (k == 0) return Threshold{-inf, INT64_MIN};
    if (k == n) return Threshold{inf, INT64_MAX};
    Threshold t{sorted[k].score, INT64_MIN};
    if (sorted[k - 1].score == sorted[k].score) t.tie_id = sorted[k].record_id;
    return t;
  };
  return {fractions, boundary(k1), boundary(k2)};
}

std::map<RecordId, Group> assign_groups(std::span<const ScoredRecord> scores,
                                        const CutoffPolicy& policy) {
  std::map<RecordId, Group> out;
  for (const auto& s : scores) {
    Group g = Group::A;
    if (policy.t2.at_or_above(s.score, s.record_id)) {
      g = Group::C;
    } else if (policy.t1.at_or_above(s.score, s.record_id)) {
      g = Group::B;
    }
    out[s.record_id] = g;
  }
  return out;
}

InterventionMetrics coverage_risk(const std::map<RecordId, Group>& groups,
                                  const std::map<RecordId, int>& labels) {
  InterventionMetrics m;
  std::int64_t total = 0;
  for (const auto& [id, g] : groups) {
    auto it = labels.find(id);
    require(it != labels.end(), ErrorKind::Validation,
            "coverage_risk: no label for record " + std::to_string(id));
    const auto k = static_cast<std::size_t>(g);
    ++m.group_sizes[k];
    if (it->second == 1) {
      ++m.no_show_counts[k];
      ++total;
    }
  }
  require(total > 0, ErrorKind::Metric, "coverage_risk: no no-shows among the records");
  m.coverage = static_cast<double>(m.no_show_counts[2]) / static_cast<double>(total);
  m.risk = static_cast<double>(m.no_show_counts[0]) / static_cast<double>(total);
  return m;
}

namespace {

std::pair<std::string, std::string> split_tag(const std::string& tag) {
  const auto slash = tag.find('/');
  if (slash == std::string::npos) return {"", tag};
  return {tag.substr(0, slash), tag.substr(slash + 1)};
}

std::string percent(double x) { return std::to_string(std::lround(x * 100.0)) + "%"; }

}  // namespace

ComparisonTable compare_models(std::span<const CvReport> reports,
                               std::span<const InterventionMetrics> metrics) {
  require(reports.size() == metrics.size(), ErrorKind::Validation,
          "compare_models: reports and metrics differ in count");
  ComparisonTable table;
  for (const auto& r : reports) {
    auto it = std::find_if(metrics.begin(), metrics.end(),
                           [&](const InterventionMetrics& m) { return m.model_tag == r.model_tag; });
    require(it != metrics.end(), ErrorKind::Validation,
            "compare_models: no metrics for model tag '" + r.model_tag + "'");
    auto [service, model] = split_tag(r.model_tag);
    table.rows.push_back({service, model, r.mean, r.std, it->risk, it->coverage});
  }
  return table;
}

std::vector<std::string> ComparisonTable::render_rows() const {
  std::vector<std::string> out;
  for (const auto& r : rows) {
    out.push_back(r.service + " | " + r.model + " | " + percent(r.risk) + " | " +
                  percent(r.coverage));
  }
  return out;
}

std::string ComparisonTable::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "service,model,mean_auroc,std_auroc,risk,coverage\n";
  for (const auto& r : rows) {
    out << r.service << ',' << r.model << ',' << r.mean_auroc << ',' << r.std_auroc << ','
        << r.risk << ',' << r.coverage << '\n';
  }
  return out.str();
}

}  // namespace noshow::eval
