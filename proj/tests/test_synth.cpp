#include <doctest.h>

#include <algorithm>

#include "helpers.hpp"
#include "noshow/synth.hpp"

using namespace noshow;
using namespace noshow::synth;

namespace {

// Pearson statistic of observed level counts against expected shares.
double chi_square(const std::map<std::string, double>& observed, const LevelDistribution& d, double n) {
  double chi = 0.0;
  for (std::size_t k = 0; k < d.levels.size(); ++k) {
    const double e = d.weights[k] * n;
    const auto it = observed.find(d.levels[k]);
    const double o = it == observed.end() ? 0.0 : it->second;
    chi += (o - e) * (o - e) / e;
  }
  return chi;
}

// Upper 1% points of the chi-square distribution by degrees of freedom.
double critical_99(std::size_t df) {
  static const std::map<std::size_t, double> table{{1, 6.635}, {3, 11.345}, {5, 15.086}, {6, 16.812}, {11, 24.725}};
  return table.at(df);
}

}  // namespace

TEST_CASE("default spec is valid and uniform") {
  const GeneratorSpec s = default_spec();
  CHECK_NOTHROW(validate(s));
  CHECK(s.zones.size() == 20);
  CHECK(s.zones.at("Z01") == "low");
  CHECK(s.zones.at("Z20") == "medium");
}

TEST_CASE("generation is deterministic per seed") {
  GeneratorSpec s = default_spec();
  s.n = 9000;
  s.seed = 4;
  const auto a = generate(s);
  const auto b = generate(s);
  CHECK(std::equal(a.begin(), a.end(), b.begin(), b.end()));
  s.seed = 5;
  const auto c = generate(s);
  CHECK_FALSE(std::equal(a.begin(), a.end(), c.begin(), c.end()));
  CHECK(a.size() == 9000);
  CHECK(a[8999].record_id == 9000);
}

TEST_CASE("level frequencies pass a goodness-of-fit test") {
  GeneratorSpec s = default_spec();
  s.n = 50000;
  s.seed = 12;
  s.frequencies["day"].weights = {0.05, 0.2, 0.2, 0.2, 0.15, 0.15, 0.05};
  s.frequencies["gender"].weights = {0.62, 0.38};
  const auto r = generate(s);
  const auto age = data::table_age_bands();
  const auto lead = data::table_lead_time_bands();
  std::map<std::string, std::map<std::string, double>> counts;
  for (const auto& x : r) {
    ++counts["gender"][std::string(data::to_string(x.gender))];
    ++counts["day"][std::string(data::to_string(x.day_of_week))];
    ++counts["month"][std::to_string(x.month)];
    ++counts["age"][age.label_of(x.age_years)];
    ++counts["lead_time"][lead.label_of(x.lead_time_days)];
    ++counts["service"][std::string(data::to_string(x.service))];
  }
  for (const char* v : {"gender", "day", "month", "age", "lead_time"}) {
    const auto& d = s.frequencies.at(v);
    CAPTURE(v);
    CHECK(chi_square(counts[v], d, 50000.0) < critical_99(d.levels.size() - 1));
  }
  LevelDistribution mix;
  for (const auto& [svc, share] : s.service_mix) {
    mix.levels.push_back(svc);
    mix.weights.push_back(share);
  }
  CHECK(chi_square(counts["service"], mix, 50000.0) < critical_99(3));
}

TEST_CASE("the descriptive-table preset reproduces the overall no-show rate") {
  GeneratorSpec s = table8_preset();
  CHECK_NOTHROW(validate(s));
  CHECK(s.service_mix.at("OH") == doctest::Approx(22613.0 / 53311.0));
  s.n = 50000;
  s.seed = 1;
  const auto r = generate(s);
  const auto y = r.labels();
  const double rate = static_cast<double>(std::count(y.begin(), y.end(), 1)) / 50000.0;
  CHECK(std::abs(rate - 15321.0 / 53311.0) < 0.015);
  CHECK(bayes_auroc(s, r) > 0.55);
}

TEST_CASE("a lead-time effect shows up as the matching log odds ratio") {
  GeneratorSpec s = default_spec();
  s.n = 60000;
  s.seed = 3;
  s.true_intercept = -1.0;
  s.true_coefficients["lead_time=>=60"] = 1.0;
  const auto r = generate(s);
  double n_hi = 0, p_hi = 0, n_lo = 0, p_lo = 0;
  for (const auto& x : r) {
    if (x.lead_time_days >= 60) {
      ++n_hi;
      p_hi += x.label();
    } else {
      ++n_lo;
      p_lo += x.label();
    }
  }
  const double log_or = logit(p_hi / n_hi) - logit(p_lo / n_lo);
  CHECK(log_or == doctest::Approx(1.0).epsilon(0.1));

  data::AppointmentRecord rec = testkit::record(1);
  rec.lead_time_days = 75;
  CHECK(true_logit(s, rec) == -0.0);
  rec.lead_time_days = 59;
  CHECK(true_logit(s, rec) == -1.0);
}

TEST_CASE("interaction and per-service effects enter the logit") {
  GeneratorSpec s = default_spec();
  s.true_intercept = 0.25;
  s.interaction_effects["gender*day=F*SAT"] = 0.8;
  s.service_coefficients["GD"]["gender=M"] = -0.4;
  data::AppointmentRecord r = testkit::record(1);
  r.gender = data::Gender::Female;
  r.day_of_week = data::Day::Sat;
  r.service = data::Service::OH;
  CHECK(true_logit(s, r) == doctest::Approx(1.05));
  r.day_of_week = data::Day::Fri;
  CHECK(true_logit(s, r) == doctest::Approx(0.25));
  r.gender = data::Gender::Male;
  r.service = data::Service::GD;
  CHECK(true_logit(s, r) == doctest::Approx(-0.15));
}

TEST_CASE("bayes auroc of a single binary effect") {
  GeneratorSpec s = default_spec();
  s.n = 50000;
  s.seed = 8;
  s.true_coefficients["gender=F"] = 1.2;
  const auto r = generate(s);
  double pf = 0, nf = 0, pm = 0, nm = 0;
  for (const auto& x : r) {
    if (x.gender == data::Gender::Female) (x.label() ? pf : nf) += 1;
    else (x.label() ? pm : nm) += 1;
  }
  const double sample = (pf * nm + 0.5 * (pf * nf + pm * nm)) / ((pf + pm) * (nf + nm));
  CHECK(bayes_auroc(s, r) == doctest::Approx(sample).epsilon(1e-12));

  const double a = sigmoid(1.2), b = 0.5;
  const double PF = 0.5 * a, NF = 0.5 * (1 - a), PM = 0.5 * b, NM = 0.5 * (1 - b);
  const double population = (PF * NM + 0.5 * (PF * NF + PM * NM)) / ((PF + PM) * (NF + NM));
  CHECK(std::abs(bayes_auroc(s, r) - population) < 0.01);
}

TEST_CASE("spec validation") {
  GeneratorSpec bad = default_spec();
  bad.frequencies["gender"].weights = {0.5, 0.4};
  CHECK_THROWS_AS(validate(bad), Error);

  bad = default_spec();
  bad.frequencies["day"].levels[0] = "FUNDAY";
  CHECK_THROWS_AS(validate(bad), Error);

  bad = default_spec();
  bad.true_coefficients["gender=X"] = 1.0;
  CHECK_THROWS_AS(validate(bad), Error);

  bad = default_spec();
  bad.interaction_effects["gender=F"] = 1.0;
  CHECK_THROWS_AS(validate(bad), Error);

  bad = default_spec();
  bad.service_mix["XX"] = 0.0;
  CHECK_THROWS_AS(validate(bad), Error);

  bad = default_spec();
  for (auto& [zone, income] : bad.zones) income = "low";
  CHECK_THROWS_AS(validate(bad), Error);

  bad = default_spec();
  bad.n = 0;
  CHECK_THROWS_AS(generate(bad), Error);
}
