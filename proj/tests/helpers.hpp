#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "noshow/dataset.hpp"
#include "noshow/encoding.hpp"
#include "noshow/rng.hpp"

namespace testkit {

using namespace noshow;

inline data::AppointmentRecord record(RecordId id, data::Outcome outcome = data::Outcome::Show) {
  data::AppointmentRecord r;
  r.record_id = id;
  r.gender = id % 2 ? data::Gender::Female : data::Gender::Male;
  r.age_years = static_cast<int>(id % 90);
  r.zone_id = "Z" + std::to_string(id % 5);
  r.zone_income = id % 3 ? data::ZoneIncome::Low : data::ZoneIncome::Medium;
  r.service = data::Service::OH;
  r.facility_id = "F" + std::to_string(id % 4);
  r.lead_time_days = static_cast<int>((id * 7) % 120);
  r.month = static_cast<int>(id % 12) + 1;
  r.day_of_week = static_cast<data::Day>(id % 7);
  r.outcome = outcome;
  return r;
}

/// Random records with a mild dependence of the outcome on lead time and gender.
inline data::RecordSet random_records(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<data::AppointmentRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    data::AppointmentRecord r = record(static_cast<RecordId>(i + 1));
    r.gender = rng.bernoulli(0.5) ? data::Gender::Female : data::Gender::Male;
    r.age_years = static_cast<int>(rng.below(90));
    r.lead_time_days = static_cast<int>(rng.below(150));
    r.month = static_cast<int>(rng.below(12)) + 1;
    r.day_of_week = static_cast<data::Day>(rng.below(7));
    r.facility_id = "F" + std::to_string(rng.below(4));
    const double z = -1.0 + 0.012 * r.lead_time_days + (r.gender == data::Gender::Male ? 0.3 : 0.0);
    r.outcome = rng.bernoulli(1.0 / (1.0 + std::exp(-z))) ? data::Outcome::NoShow : data::Outcome::Show;
    out.push_back(r);
  }
  return data::RecordSet(std::move(out));
}

/// O(n^2) Mann-Whitney count.
inline double pairwise_auroc(const std::vector<double>& s, const std::vector<int>& y) {
  double good = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1.0;
      if (s[i] > s[j]) good += 1.0;
      else if (s[i] == s[j]) good += 0.5;
    }
  }
  return good / pairs;
}

/// Central finite difference of f at x along every coordinate.
inline Vector numeric_gradient(const std::function<double(const Vector&)>& f, Vector x, double h = 1e-5) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double max_relative_error(const Vector& a, const Vector& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), 1e-6});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

/// Small dense design with a schema made of `width` single-level columns.
inline data::DesignMatrix design(const Matrix& rows, const Vector& labels) {
  data::DesignMatrix X;
  X.rows = rows;
  X.labels = labels;
  std::vector<data::VariableLevels> vars;
  X.row_ids.resize(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index i = 0; i < rows.rows(); ++i) X.row_ids[static_cast<std::size_t>(i)] = i + 1;
  return X;
}

}  // namespace testkit
