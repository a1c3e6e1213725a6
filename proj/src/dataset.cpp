#include "noshow/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "noshow/binning.hpp"
#include "noshow/rng.hpp"

namespace noshow {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Validation: return "validation_error";
    case ErrorKind::Schema: return "schema_error";
    case ErrorKind::Encoding: return "encoding_error";
    case ErrorKind::Dimension: return "dimension_error";
    case ErrorKind::Convergence: return "convergence_error";
    case ErrorKind::Divergence: return "divergence_error";
    case ErrorKind::Metric: return "metric_error";
    case ErrorKind::Policy: return "policy_error";
    case ErrorKind::Search: return "search_error";
    case ErrorKind::Propagation: return "propagation_error";
    case ErrorKind::Io: return "io_error";
  }
  return "error";
}

}  // namespace noshow

namespace noshow::data {

namespace {

constexpr std::array<std::string_view, 7> kDayNames{"SUN", "MON", "TUE", "WED", "THU", "FRI", "SAT"};
constexpr std::array<std::string_view, 4> kServiceNames{"OH", "GD", "YAP", "SP"};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return value;
}

std::optional<double> parse_double(std::string_view s) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    double v = std::stod(std::string(s), &used);
    if (used != s.size()) return std::nullopt;
    return v;
  } catch (...) {
    return std::nullopt;
  }
}

const std::vector<std::string> kRequiredColumns{
    "record_id", "gender",         "age_years", "zone_id",     "service",
    "facility_id", "lead_time_days", "month",     "day_of_week", "outcome"};

}  // namespace

std::string_view to_string(Gender g) { return g == Gender::Female ? "F" : "M"; }
std::string_view to_string(ZoneIncome z) { return z == ZoneIncome::Low ? "low" : "medium"; }
std::string_view to_string(Service s) { return kServiceNames[static_cast<int>(s)]; }
std::string_view to_string(Day d) { return kDayNames[static_cast<int>(d)]; }
std::string_view to_string(Outcome o) { return o == Outcome::Show ? "show" : "no_show"; }

std::string_view display_name(Service s) {
  return s == Service::GD ? std::string_view("G&D") : to_string(s);
}

std::optional<Gender> parse_gender(std::string_view s) {
  if (s == "F") return Gender::Female;
  if (s == "M") return Gender::Male;
  return std::nullopt;
}

std::optional<ZoneIncome> parse_zone_income(std::string_view s) {
  if (s == "low") return ZoneIncome::Low;
  if (s == "medium") return ZoneIncome::Medium;
  return std::nullopt;
}

std::optional<Service> parse_service(std::string_view s) {
  if (s == "G&D") return Service::GD;
  for (std::size_t i = 0; i < kServiceNames.size(); ++i) {
    if (s == kServiceNames[i]) return static_cast<Service>(i);
  }
  return std::nullopt;
}

std::optional<Day> parse_day(std::string_view s) {
  for (std::size_t i = 0; i < kDayNames.size(); ++i) {
    if (s == kDayNames[i]) return static_cast<Day>(i);
  }
  return std::nullopt;
}

std::optional<Outcome> parse_outcome(std::string_view s) {
  if (s == "show") return Outcome::Show;
  if (s == "no_show") return Outcome::NoShow;
  return std::nullopt;
}

std::string_view to_string(Variable v) {
  switch (v) {
    case Variable::Gender: return "gender";
    case Variable::Age: return "age";
    case Variable::Zone: return "zone";
    case Variable::ZoneIncome: return "zone_income";
    case Variable::Service: return "service";
    case Variable::Facility: return "facility";
    case Variable::LeadTime: return "lead_time";
    case Variable::Month: return "month";
    case Variable::Day: return "day";
  }
  return "?";
}

std::optional<Variable> parse_variable(std::string_view s) {
  for (auto v : {Variable::Gender, Variable::Age, Variable::Zone, Variable::ZoneIncome,
                 Variable::Service, Variable::Facility, Variable::LeadTime, Variable::Month,
                 Variable::Day}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

std::optional<std::string> check_record(const AppointmentRecord& r) {
  if (r.age_years < 0 || r.age_years > kMaxAge) return "age_years out of range [0, 120]";
  if (r.lead_time_days < 0 || r.lead_time_days > kMaxLeadTime)
    return "lead_time_days out of range [0, 1000]";
  if (r.month < 1 || r.month > 12) return "month out of range [1, 12]";
  if (r.zone_id.empty()) return "empty zone_id";
  if (r.facility_id.empty()) return "empty facility_id";
  return std::nullopt;
}

RecordSet::RecordSet(std::vector<AppointmentRecord> records) : records_(std::move(records)) {
  std::unordered_set<RecordId> seen;
  seen.reserve(records_.size());
  for (const auto& r : records_) {
    if (auto why = check_record(r))
      throw Error(ErrorKind::Validation, "record " + std::to_string(r.record_id) + ": " + *why);
    if (!seen.insert(r.record_id).second)
      throw Error(ErrorKind::Validation, "duplicate record_id " + std::to_string(r.record_id));
  }
}

std::vector<int> RecordSet::labels() const {
  std::vector<int> out;
  out.reserve(records_.size());
  for (const auto& r : records_) out.push_back(r.label());
  return out;
}

RecordSet RecordSet::filter_service(Service s) const {
  RecordSet out;
  for (const auto& r : records_) {
    if (r.service == s) out.records_.push_back(r);
  }
  return out;
}

RecordSet RecordSet::subset(std::span<const std::size_t> indices) const {
  RecordSet out;
  out.records_.reserve(indices.size());
  for (std::size_t i : indices) out.records_.push_back(records_.at(i));
  std::unordered_set<RecordId> seen;
  for (const auto& r : out.records_) {
    if (!seen.insert(r.record_id).second)
      throw Error(ErrorKind::Validation, "subset repeats record_id " + std::to_string(r.record_id));
  }
  return out;
}

std::optional<std::size_t> RecordSet::find(RecordId id) const {
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (records_[i].record_id == id) return i;
  }
  return std::nullopt;
}

IngestResult parse_csv(std::istream& in, const ZoneStrata* strata) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Schema, "empty CSV: header required");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM

  std::unordered_map<std::string, std::size_t> column_index;
  const auto header = split_fields(line);
  for (std::size_t i = 0; i < header.size(); ++i) column_index[std::string(header[i])] = i;
  for (const auto& name : kRequiredColumns) {
    if (!column_index.count(name))
      throw Error(ErrorKind::Schema, "missing required column '" + name + "'");
  }
  const bool has_income = column_index.count("zone_income") > 0;
  if (!has_income && strata == nullptr)
    throw Error(ErrorKind::Schema,
                "missing required column 'zone_income' (or supply a zone-strata file)");

  IngestResult result;
  std::vector<AppointmentRecord> records;
  std::unordered_set<RecordId> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_fields(line);
    auto reject = [&](std::string reason) {
      result.rejects.push_back({line_no, std::move(reason)});
    };
    if (f.size() != header.size()) {
      reject("expected " + std::to_string(header.size()) + " fields, got " +
             std::to_string(f.size()));
      continue;
    }
    auto field = [&](const std::string& name) { return f[column_index.at(name)]; };

    AppointmentRecord r;
    auto id = parse_number<RecordId>(field("record_id"));
    auto gender = parse_gender(field("gender"));
    auto age = parse_number<int>(field("age_years"));
    auto service = parse_service(field("service"));
    auto lead = parse_number<int>(field("lead_time_days"));
    auto month = parse_number<int>(field("month"));
    auto day = parse_day(field("day_of_week"));
    auto outcome = parse_outcome(field("outcome"));
    if (!id) { reject("unparsable record_id"); continue; }
    if (!gender) { reject("unparsable gender '" + std::string(field("gender")) + "'"); continue; }
    if (!age) { reject("unparsable age_years"); continue; }
    if (!service) { reject("unparsable service '" + std::string(field("service")) + "'"); continue; }
    if (!lead) { reject("unparsable lead_time_days"); continue; }
    if (!month) { reject("unparsable month"); continue; }
    if (!day) { reject("unparsable day_of_week '" + std::string(field("day_of_week")) + "'"); continue; }
    if (!outcome) { reject("unparsable outcome '" + std::string(field("outcome")) + "'"); continue; }
    r.record_id = *id;
    r.gender = *gender;
    r.age_years = *age;
    r.zone_id = std::string(field("zone_id"));
    r.service = *service;
    r.facility_id = std::string(field("facility_id"));
    r.lead_time_days = *lead;
    r.month = *month;
    r.day_of_week = *day;
    r.outcome = *outcome;

    std::string_view income_text = has_income ? field("zone_income") : std::string_view();
    if (!income_text.empty()) {
      auto income = parse_zone_income(income_text);
      if (!income) { reject("unparsable zone_income '" + std::string(income_text) + "'"); continue; }
      r.zone_income = *income;
    } else {
      auto it = strata ? strata->find(r.zone_id) : ZoneStrata::const_iterator{};
      if (!strata || it == strata->end()) {
        reject("missing zone_income and no strata for zone '" + r.zone_id + "'");
        continue;
      }
      try {
        r.zone_income = classify_zone_income(it->second);
      } catch (const Error& e) {
        reject(e.what());
        continue;
      }
    }
    if (auto why = check_record(r)) { reject(*why); continue; }
    if (!seen.insert(r.record_id).second) {
      reject("duplicate record_id " + std::to_string(r.record_id));
      continue;
    }
    records.push_back(std::move(r));
  }
  result.records = RecordSet(std::move(records));
  return result;
}

IngestResult ingest_csv(const std::string& path, const ZoneStrata* strata) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  return parse_csv(in, strata);
}

void write_csv(std::ostream& out, const RecordSet& records) {
  out << "record_id,gender,age_years,zone_id,zone_income,service,facility_id,lead_time_days,"
         "month,day_of_week,outcome\n";
  for (const auto& r : records) {
    out << r.record_id << ',' << to_string(r.gender) << ',' << r.age_years << ',' << r.zone_id
        << ',' << to_string(r.zone_income) << ',' << to_string(r.service) << ','
        << r.facility_id << ',' << r.lead_time_days << ',' << r.month << ','
        << to_string(r.day_of_week) << ',' << to_string(r.outcome) << '\n';
  }
}

void write_csv(const std::string& path, const RecordSet& records) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
  write_csv(out, records);
}

ZoneStrata read_zone_strata(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Schema, "empty zone-strata CSV");
  const auto header = split_fields(line);
  if (header.empty() || header[0] != "zone_id")
    throw Error(ErrorKind::Schema, "zone-strata CSV must start with zone_id");
  ZoneStrata out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != header.size())
      throw Error(ErrorKind::Schema, "zone-strata line " + std::to_string(line_no) +
                                         ": wrong field count");
    std::vector<double> shares;
    for (std::size_t i = 1; i < f.size(); ++i) {
      auto v = parse_double(f[i]);
      if (!v) throw Error(ErrorKind::Schema, "zone-strata line " + std::to_string(line_no) +
                                                 ": unparsable share");
      shares.push_back(*v);
    }
    out[std::string(f[0])] = std::move(shares);
  }
  return out;
}

ZoneStrata read_zone_strata(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  return read_zone_strata(in);
}

ZoneIncome classify_zone_income(std::span<const double> shares) {
  require(shares.size() >= 2, ErrorKind::Validation, "need at least two strata shares");
  double total = 0.0;
  for (double s : shares) {
    require(s >= 0.0 && std::isfinite(s), ErrorKind::Validation, "strata shares must be >= 0");
    total += s;
  }
  require(std::abs(total - 1.0) <= 1e-9, ErrorKind::Validation,
          "strata shares must sum to 1 (got " + std::to_string(total) + ")");
  return shares[0] + shares[1] >= 0.5 ? ZoneIncome::Low : ZoneIncome::Medium;
}

double cramers_v(const Matrix& table) {
  const double n = table.sum();
  require(n > 0.0, ErrorKind::Validation, "empty contingency table");
  // Drop empty rows/columns: they are absent levels, not degrees of freedom.
  std::vector<Eigen::Index> rows, cols;
  for (Eigen::Index i = 0; i < table.rows(); ++i)
    if (table.row(i).sum() > 0.0) rows.push_back(i);
  for (Eigen::Index j = 0; j < table.cols(); ++j)
    if (table.col(j).sum() > 0.0) cols.push_back(j);
  const auto k = std::min(rows.size(), cols.size());
  if (k < 2) return 0.0;
  double chi2 = 0.0;
  for (auto i : rows) {
    const double ri = table.row(i).sum();
    for (auto j : cols) {
      const double expected = ri * table.col(j).sum() / n;
      const double d = table(i, j) - expected;
      chi2 += d * d / expected;
    }
  }
  return std::min(1.0, std::sqrt(chi2 / (n * static_cast<double>(k - 1))));
}

double cramers_v(std::span<const std::string> a, std::span<const std::string> b) {
  require(a.size() == b.size(), ErrorKind::Validation, "cramers_v: length mismatch");
  require(a.size() >= 2, ErrorKind::Validation, "cramers_v: need at least two observations");
  std::map<std::string, Eigen::Index> la, lb;
  for (const auto& s : a) la.emplace(s, 0);
  for (const auto& s : b) lb.emplace(s, 0);
  Eigen::Index k = 0;
  for (auto& [_, idx] : la) idx = k++;
  k = 0;
  for (auto& [_, idx] : lb) idx = k++;
  Matrix table = Matrix::Zero(static_cast<Eigen::Index>(la.size()),
                              static_cast<Eigen::Index>(lb.size()));
  for (std::size_t i = 0; i < a.size(); ++i) table(la[a[i]], lb[b[i]]) += 1.0;
  return cramers_v(table);
}

std::vector<RateRow> marginal_rates(const RecordSet& records, Variable group_by,
                                    const BinSpec* bins) {
  require(!records.empty(), ErrorKind::Validation, "marginal_rates: empty record set");
  if (group_by == Variable::Age || group_by == Variable::LeadTime) {
    require(bins != nullptr && bins->variable() == group_by, ErrorKind::Validation,
            "marginal_rates: binned variable needs a matching BinSpec");
  }
  auto level = [&](const AppointmentRecord& r) -> std::string {
    switch (group_by) {
      case Variable::Gender: return std::string(to_string(r.gender));
      case Variable::Age: return bins->label_of(r.age_years);
      case Variable::Zone: return r.zone_id;
      case Variable::ZoneIncome: return std::string(to_string(r.zone_income));
      case Variable::Service: return std::string(to_string(r.service));
      case Variable::Facility: return r.facility_id;
      case Variable::LeadTime: return bins->label_of(r.lead_time_days);
      case Variable::Month: return std::to_string(r.month);
      case Variable::Day: return std::string(to_string(r.day_of_week));
    }
    return {};
  };
  // level order: bins in order, everything else by first appearance sorted
  std::vector<std::string> order;
  if (bins) {
    order = bins->labels();
  } else if (group_by == Variable::Month) {
    for (int m = 1; m <= 12; ++m) order.push_back(std::to_string(m));
  } else if (group_by == Variable::Day) {
    for (auto d : kDayNames) order.emplace_back(d);
  } else {
    std::map<std::string, int> seen;
    for (const auto& r : records) seen.emplace(level(r), 0);
    for (const auto& [name, _] : seen) order.push_back(name);
  }

  std::map<std::pair<int, std::string>, std::pair<std::int64_t, std::int64_t>> counts;
  for (const auto& r : records) {
    for (int s : {static_cast<int>(r.service), 4}) {
      auto& c = counts[{s, level(r)}];
      (r.outcome == Outcome::NoShow ? c.second : c.first) += 1;
    }
  }
  std::vector<RateRow> out;
  for (int s = 0; s <= 4; ++s) {
    bool present = false;
    for (const auto& name : order) present |= counts.count({s, name}) > 0;
    if (!present) continue;
    for (const auto& name : order) {
      auto it = counts.find({s, name});
      if (it == counts.end()) continue;
      RateRow row;
      row.service = s == 4 ? "Total" : std::string(display_name(static_cast<Service>(s)));
      row.level = name;
      row.n_show = it->second.first;
      row.n_no_show = it->second.second;
      row.rate = static_cast<double>(row.n_no_show) / static_cast<double>(row.n_show + row.n_no_show);
      out.push_back(std::move(row));
    }
  }
  return out;
}

std::pair<RecordSet, RecordSet> split(const RecordSet& records, double train_fraction,
                                      bool stratify, std::uint64_t seed) {
  require(train_fraction > 0.0 && train_fraction < 1.0, ErrorKind::Validation,
          "train_fraction must lie in (0, 1)");
  const std::size_t n = records.size();
  require(n >= 2, ErrorKind::Validation, "split needs at least two records");
  Rng rng(seed, {0x5b11});
  const auto train_total = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n) + 1e-9)), 1,
      n - 1);

  std::vector<std::size_t> train, test;
  if (!stratify) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(std::span(idx));
    train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(train_total));
    test.assign(idx.begin() + static_cast<std::ptrdiff_t>(train_total), idx.end());
  } else {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < n; ++i) (records[i].label() ? pos : neg).push_back(i);
    require(pos.size() >= 2 && neg.size() >= 2, ErrorKind::Validation,
            "stratified split needs at least two records per class");
    rng.shuffle(std::span(pos));
    rng.shuffle(std::span(neg));
    // positives in the train part: nearest integer to the overall rate times
    // the train size, which bounds the rate drift by 1/(2 * train size)
    auto k_pos = static_cast<std::size_t>(std::llround(
        static_cast<double>(pos.size()) * static_cast<double>(train_total) / static_cast<double>(n)));
    k_pos = std::clamp<std::size_t>(k_pos, 1, pos.size() - 1);
    k_pos = std::min(k_pos, train_total - 1);
    std::size_t k_neg = train_total - k_pos;
    if (k_neg >= neg.size()) {
      k_neg = neg.size() - 1;
      k_pos = train_total - k_neg;
    }
    train.insert(train.end(), pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(k_pos));
    train.insert(train.end(), neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(k_neg));
    test.insert(test.end(), pos.begin() + static_cast<std::ptrdiff_t>(k_pos), pos.end());
    test.insert(test.end(), neg.begin() + static_cast<std::ptrdiff_t>(k_neg), neg.end());
  }
  // keep source order inside each part
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {records.subset(train), records.subset(test)};
}

ClassWeights class_weights(std::span<const int> labels) {
  std::size_t n_pos = 0;
  for (int y : labels) n_pos += (y == 1);
  const std::size_t n = labels.size();
  const std::size_t n_neg = n - n_pos;
  require(n_pos > 0 && n_neg > 0, ErrorKind::Validation,
          "class_weights: both classes must be present");
  const double total = static_cast<double>(n);
  return {total / (2.0 * static_cast<double>(n_neg)), total / (2.0 * static_cast<double>(n_pos))};
}

ClassWeights class_weights(const Vector& labels) {
  std::vector<int> y(static_cast<std::size_t>(labels.size()));
  for (Eigen::Index i = 0; i < labels.size(); ++i) y[static_cast<std::size_t>(i)] = labels[i] > 0.5;
  return class_weights(y);
}

}  // namespace noshow::data
