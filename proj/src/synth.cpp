#include "noshow/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

#include "noshow/binning.hpp"
#include "noshow/encoding.hpp"
#include "noshow/evaluation.hpp"
#include "noshow/parallel.hpp"
#include "noshow/rng.hpp"

namespace noshow::synth {

using data::Variable;

namespace {

constexpr std::array kSampled{"gender", "age", "lead_time", "zone_income", "facility", "month", "day"};
constexpr std::int64_t kShard = 4096;

LevelDistribution uniform(std::vector<std::string> levels) {
  std::vector<double> w(levels.size(), 1.0 / static_cast<double>(levels.size()));
  return {std::move(levels), std::move(w)};
}

const data::FeatureSchema& probe() {
  static const data::FeatureSchema schema({}, {data::table_age_bands(), data::table_lead_time_bands()}, {});
  return schema;
}

std::vector<std::string> day_levels() {
  std::vector<std::string> out;
  for (int d = 0; d < 7; ++d) out.emplace_back(data::to_string(static_cast<data::Day>(d)));
  return out;
}

std::vector<std::string> month_levels() {
  std::vector<std::string> out;
  for (int m = 1; m <= 12; ++m) out.push_back(std::to_string(m));
  return out;
}

Variable variable_named(const std::string& name) {
  auto v = data::parse_variable(name);
  require(v.has_value(), ErrorKind::Validation, "generator spec: unknown variable '" + name + "'");
  return *v;
}

// Levels an effect or a distribution may name for each variable.
std::set<std::string> allowed_levels(const GeneratorSpec& spec, Variable v) {
  switch (v) {
    case Variable::Gender: return {"F", "M"};
    case Variable::Age: {
      const auto l = data::table_age_bands().labels();
      return {l.begin(), l.end()};
    }
    case Variable::LeadTime: {
      const auto l = data::table_lead_time_bands().labels();
      return {l.begin(), l.end()};
    }
    case Variable::ZoneIncome: return {"low", "medium"};
    case Variable::Service: return {"OH", "GD", "YAP", "SP"};
    case Variable::Day: {
      const auto d = day_levels();
      return {d.begin(), d.end()};
    }
    case Variable::Month: {
      const auto m = month_levels();
      return {m.begin(), m.end()};
    }
    case Variable::Facility: {
      std::set<std::string> out;
      if (auto it = spec.frequencies.find("facility"); it != spec.frequencies.end())
        out.insert(it->second.levels.begin(), it->second.levels.end());
      for (const auto& [s, freq] : spec.service_frequencies)
        if (auto it = freq.find("facility"); it != freq.end())
          out.insert(it->second.levels.begin(), it->second.levels.end());
      return out;
    }
    case Variable::Zone: {
      std::set<std::string> out;
      for (const auto& [z, income] : spec.zones) out.insert(z);
      return out;
    }
  }
  return {};
}

void check_distribution(const GeneratorSpec& spec, const std::string& name,
                        const LevelDistribution& d, const std::string& where) {
  const Variable v = variable_named(name);
  const std::string ctx = "generator spec: " + where + name;
  require(!d.levels.empty() && d.levels.size() == d.weights.size(), ErrorKind::Validation,
          ctx + " needs one weight per level");
  double total = 0.0;
  for (double w : d.weights) {
    require(std::isfinite(w) && w >= 0.0, ErrorKind::Validation, ctx + " has a negative weight");
    total += w;
  }
  require(std::abs(total - 1.0) <= 1e-9, ErrorKind::Validation,
          ctx + " frequencies sum to " + std::to_string(total));
  if (v == Variable::Facility) {
    for (const auto& l : d.levels) require(!l.empty(), ErrorKind::Validation, ctx + " has an empty level");
    return;
  }
  const auto allowed = allowed_levels(spec, v);
  for (const auto& l : d.levels)
    require(allowed.count(l) > 0, ErrorKind::Validation, ctx + " has unknown level '" + l + "'");
}

struct Effect {
  Variable variable;
  std::string level;
};

Effect parse_effect(const GeneratorSpec& spec, const std::string& key) {
  const auto eq = key.find('=');
  require(eq != std::string::npos, ErrorKind::Validation, "generator spec: bad effect key '" + key + "'");
  Effect e{variable_named(key.substr(0, eq)), key.substr(eq + 1)};
  require(allowed_levels(spec, e.variable).count(e.level) > 0, ErrorKind::Validation,
          "generator spec: effect '" + key + "' names an unknown level");
  return e;
}

struct Pair {
  Variable a, b;
  std::string la, lb;
  double beta;
};

Pair parse_interaction(const GeneratorSpec& spec, const std::string& key, double beta) {
  const auto eq = key.find('=');
  const std::string vars = eq == std::string::npos ? "" : key.substr(0, eq);
  const std::string levels = eq == std::string::npos ? "" : key.substr(eq + 1);
  const auto sv = vars.find('*'), sl = levels.find('*');
  require(sv != std::string::npos && sl != std::string::npos, ErrorKind::Validation,
          "generator spec: bad interaction key '" + key + "'");
  const Effect ea = parse_effect(spec, vars.substr(0, sv) + "=" + levels.substr(0, sl));
  const Effect eb = parse_effect(spec, vars.substr(sv + 1) + "=" + levels.substr(sl + 1));
  return {ea.variable, eb.variable, ea.level, eb.level, beta};
}

constexpr std::array kAllVariables{Variable::Gender,   Variable::Age,      Variable::Zone,
                                   Variable::ZoneIncome, Variable::Service, Variable::Facility,
                                   Variable::LeadTime, Variable::Month,    Variable::Day};

// Effects resolved to per-variable lookup tables.
class Compiled {
 public:
  explicit Compiled(const GeneratorSpec& spec) : intercept_(spec.true_intercept) {
    for (const auto& [key, beta] : spec.true_coefficients) {
      const Effect e = parse_effect(spec, key);
      global_[static_cast<int>(e.variable)][e.level] += beta;
    }
    for (const auto& [svc, coefs] : spec.service_coefficients) {
      auto s = data::parse_service(svc);
      require(s.has_value(), ErrorKind::Validation, "generator spec: unknown service '" + svc + "'");
      for (const auto& [key, beta] : coefs) {
        const Effect e = parse_effect(spec, key);
        service_[static_cast<int>(*s)][static_cast<int>(e.variable)][e.level] += beta;
      }
    }
    for (const auto& [key, beta] : spec.interaction_effects) pairs_.push_back(parse_interaction(spec, key, beta));
  }

  double logit(const data::AppointmentRecord& r) const {
    double z = intercept_;
    const auto& svc = service_[static_cast<int>(r.service)];
    for (Variable v : kAllVariables) {
      const int k = static_cast<int>(v);
      if (global_[k].empty() && svc[k].empty()) continue;
      const std::string level = probe().level_of(r, v);
      if (auto it = global_[k].find(level); it != global_[k].end()) z += it->second;
      if (auto it = svc[k].find(level); it != svc[k].end()) z += it->second;
    }
    for (const auto& p : pairs_) {
      if (probe().level_of(r, p.a) == p.la && probe().level_of(r, p.b) == p.lb) z += p.beta;
    }
    return z;
  }

 private:
  using Table = std::array<std::map<std::string, double>, kAllVariables.size()>;
  double intercept_;
  Table global_;
  std::array<Table, 4> service_;
  std::vector<Pair> pairs_;
};

int sample_in_band(const data::BinSpec& bins, std::size_t band, int top_width, Rng& rng) {
  const auto& cuts = bins.cut_points();
  const int lo = band == 0 ? 0 : cuts[band - 1];
  const int hi = band == cuts.size() ? lo + top_width : cuts[band];
  return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo)));
}

}  // namespace

GeneratorSpec default_spec() {
  GeneratorSpec s;
  for (const char* svc : {"OH", "GD", "YAP", "SP"}) s.service_mix[svc] = 0.25;
  s.frequencies["gender"] = uniform({"F", "M"});
  s.frequencies["age"] = uniform(data::table_age_bands().labels());
  s.frequencies["lead_time"] = uniform(data::table_lead_time_bands().labels());
  s.frequencies["zone_income"] = uniform({"low", "medium"});
  s.frequencies["facility"] = uniform({"F01", "F02", "F03", "F04", "F05", "F06"});
  s.frequencies["month"] = uniform(month_levels());
  s.frequencies["day"] = uniform(day_levels());
  for (int z = 1; z <= 20; ++z) {
    std::string id = (z < 10 ? "Z0" : "Z") + std::to_string(z);
    s.zones[id] = z <= 10 ? "low" : "medium";
  }
  return s;
}

GeneratorSpec table8_preset() {
  struct Counts {
    const char* service;
    std::array<std::array<double, 2>, 2> gender;  // women, men: show, no-show
    std::array<std::array<double, 2>, 7> age;
    std::array<std::array<double, 2>, 4> lead;
  };
  static const std::array<Counts, 4> table{{
      {"OH",
       {{{8457, 3475}, {7482, 3199}}},
       {{{1659, 638}, {2860, 1186}, {1467, 789}, {2316, 1058}, {2964, 1209}, {2093, 791}, {2580, 1003}}},
       {{{7689, 2259}, {2079, 1061}, {1503, 785}, {4668, 2569}}}},
      {"GD",
       {{{2629, 965}, {2650, 999}}},
       {{{5197, 1918}, {82, 46}, {0, 0}, {0, 0}, {0, 0}, {0, 0}, {0, 0}}},
       {{{3329, 929}, {754, 453}, {373, 166}, {823, 416}}}},
      {"YAP",
       {{{4078, 1946}, {4035, 2065}}},
       {{{0, 0}, {5856, 2530}, {2092, 1178}, {165, 91}, {0, 0}, {0, 0}, {0, 0}}},
       {{{4969, 2029}, {902, 562}, {488, 299}, {1754, 1121}}}},
      {"SP",
       {{{3294, 1067}, {5365, 1605}}},
       {{{0, 0}, {0, 0}, {0, 0}, {0, 0}, {1294, 425}, {3232, 1014}, {4133, 1233}}},
       {{{4070, 1068}, {1013, 434}, {901, 309}, {2675, 861}}}},
  }};

  GeneratorSpec s = default_spec();
  const auto age_labels = data::table_age_bands().labels();
  const auto lead_labels = data::table_lead_time_bands().labels();
  const auto rate = [](const std::array<double, 2>& c) { return c[1] / (c[0] + c[1]); };

  double total = 0.0, total_no_show = 0.0;
  std::array<double, 4> size{}, no_show{};
  for (std::size_t k = 0; k < 4; ++k) {
    for (const auto& g : table[k].gender) {
      size[k] += g[0] + g[1];
      no_show[k] += g[1];
    }
    total += size[k];
    total_no_show += no_show[k];
  }
  s.true_intercept = logit(total_no_show / total);

  for (std::size_t k = 0; k < 4; ++k) {
    const auto& t = table[k];
    const std::string svc = t.service;
    s.service_mix[svc] = size[k] / total;
    const double base = logit(no_show[k] / size[k]);
    s.true_coefficients["service=" + svc] = base - s.true_intercept;
    auto& freq = s.service_frequencies[svc];
    auto& coef = s.service_coefficients[svc];

    const auto add = [&](const std::string& var, const std::vector<std::string>& labels, const auto& rows) {
      LevelDistribution d;
      double block = 0.0;
      for (const auto& r : rows) block += r[0] + r[1];
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const double n = rows[i][0] + rows[i][1];
        if (n == 0.0) continue;
        d.levels.push_back(labels[i]);
        d.weights.push_back(n / block);
        coef[var + "=" + labels[i]] = logit(rate(rows[i])) - base;
      }
      freq[var] = d;
    };
    add("gender", {"F", "M"}, t.gender);
    add("age", age_labels, t.age);
    add("lead_time", lead_labels, t.lead);
  }
  return s;
}

void validate(const GeneratorSpec& spec) {
  require(spec.n >= 1, ErrorKind::Validation, "generator spec: n must be positive");
  require(!spec.service_mix.empty(), ErrorKind::Validation, "generator spec: empty service mix");
  double mix = 0.0;
  for (const auto& [svc, share] : spec.service_mix) {
    require(data::parse_service(svc).has_value(), ErrorKind::Validation,
            "generator spec: unknown service '" + svc + "'");
    require(std::isfinite(share) && share >= 0.0, ErrorKind::Validation,
            "generator spec: negative service share");
    mix += share;
  }
  require(std::abs(mix - 1.0) <= 1e-9, ErrorKind::Validation,
          "generator spec: service mix sums to " + std::to_string(mix));
  for (const char* name : kSampled)
    require(spec.frequencies.count(name) > 0, ErrorKind::Validation,
            std::string("generator spec: no frequencies for ") + name);
  for (const auto& [name, d] : spec.frequencies) check_distribution(spec, name, d, "");
  for (const auto& [svc, freq] : spec.service_frequencies) {
    require(data::parse_service(svc).has_value(), ErrorKind::Validation,
            "generator spec: unknown service '" + svc + "'");
    for (const auto& [name, d] : freq) check_distribution(spec, name, d, svc + " ");
  }
  std::set<std::string> incomes;
  for (const auto& [zone, income] : spec.zones) {
    require(income == "low" || income == "medium", ErrorKind::Validation,
            "generator spec: zone " + zone + " has unknown income class '" + income + "'");
    incomes.insert(income);
  }
  for (const char* income : {"low", "medium"})
    require(incomes.count(income) > 0, ErrorKind::Validation,
            std::string("generator spec: no zone with income class ") + income);
  require(std::isfinite(spec.true_intercept), ErrorKind::Validation, "generator spec: non-finite intercept");
  const auto finite = [](const std::map<std::string, double>& m) {
    return std::all_of(m.begin(), m.end(), [](const auto& kv) { return std::isfinite(kv.second); });
  };
  require(finite(spec.true_coefficients) && finite(spec.interaction_effects), ErrorKind::Validation,
          "generator spec: non-finite effect");
  for (const auto& [svc, c] : spec.service_coefficients)
    require(finite(c), ErrorKind::Validation, "generator spec: non-finite effect");
  Compiled check(spec);
}

data::RecordSet generate(const GeneratorSpec& spec) {
  validate(spec);
  const Compiled effects(spec);
  const data::BinSpec age_bins = data::table_age_bands();
  const data::BinSpec lead_bins = data::table_lead_time_bands();

  std::vector<std::string> services;
  std::vector<double> mix;
  for (const auto& [svc, share] : spec.service_mix) {
    services.push_back(svc);
    mix.push_back(share);
  }
  std::map<std::string, std::vector<std::string>> zones_by_income;
  for (const auto& [zone, income] : spec.zones) zones_by_income[income].push_back(zone);

  const auto dist = [&](const std::string& svc, const char* name) -> const LevelDistribution& {
    if (auto it = spec.service_frequencies.find(svc); it != spec.service_frequencies.end())
      if (auto jt = it->second.find(name); jt != it->second.end()) return jt->second;
    return spec.frequencies.at(name);
  };

  std::vector<data::AppointmentRecord> out(static_cast<std::size_t>(spec.n));
  const auto shards = static_cast<std::size_t>((spec.n + kShard - 1) / kShard);
  parallel_for(shards, [&](std::size_t shard) {
    Rng rng(spec.seed, {0x5e7, shard});
    const std::int64_t first = static_cast<std::int64_t>(shard) * kShard;
    const std::int64_t last = std::min(spec.n, first + kShard);
    for (std::int64_t i = first; i < last; ++i) {
      data::AppointmentRecord& r = out[static_cast<std::size_t>(i)];
      r.record_id = i + 1;
      const std::string& svc = services[rng.categorical(mix)];
      r.service = *data::parse_service(svc);
      const auto draw = [&](const char* name) -> const std::string& {
        const LevelDistribution& d = dist(svc, name);
        return d.levels[rng.categorical(d.weights)];
      };
      r.gender = *data::parse_gender(draw("gender"));
      {
        const std::string& band = draw("age");
        const auto& labels = age_bins.labels();
        const auto b = static_cast<std::size_t>(std::find(labels.begin(), labels.end(), band) - labels.begin());
        r.age_years = sample_in_band(age_bins, b, 30, rng);
      }
      {
        const std::string& band = draw("lead_time");
        const auto& labels = lead_bins.labels();
        const auto b = static_cast<std::size_t>(std::find(labels.begin(), labels.end(), band) - labels.begin());
        r.lead_time_days = sample_in_band(lead_bins, b, 120, rng);
      }
      const std::string& income = draw("zone_income");
      r.zone_income = *data::parse_zone_income(income);
      const auto& zones = zones_by_income.at(income);
      r.zone_id = zones[rng.below(zones.size())];
      r.facility_id = draw("facility");
      r.month = std::stoi(draw("month"));
      r.day_of_week = *data::parse_day(draw("day"));
      r.outcome = rng.bernoulli(sigmoid(effects.logit(r))) ? data::Outcome::NoShow : data::Outcome::Show;
    }
  });
  return data::RecordSet(std::move(out));
}

double true_logit(const GeneratorSpec& spec, const data::AppointmentRecord& record) {
  return Compiled(spec).logit(record);
}

Vector true_probabilities(const GeneratorSpec& spec, const data::RecordSet& records) {
  const Compiled effects(spec);
  Vector p(static_cast<Eigen::Index>(records.size()));
  for (std::size_t i = 0; i < records.size(); ++i)
    p[static_cast<Eigen::Index>(i)] = sigmoid(effects.logit(records[i]));
  return p;
}

double bayes_auroc(const GeneratorSpec& spec, const data::RecordSet& records) {
  const Vector p = true_probabilities(spec, records);
  const auto labels = records.labels();
  return eval::auroc(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())), labels);
}

}  // namespace noshow::synth
