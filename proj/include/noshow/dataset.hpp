#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "noshow/common.hpp"

namespace noshow::data {

enum class Gender { Female, Male };
enum class ZoneIncome { Low, Medium };
enum class Service { OH, GD, YAP, SP };
enum class Day { Sun, Mon, Tue, Wed, Thu, Fri, Sat };
enum class Outcome { Show, NoShow };

inline constexpr std::array kServices{Service::OH, Service::GD, Service::YAP, Service::SP};

// Wire spellings used by the CSV schema.
std::string_view to_string(Gender g);
std::string_view to_string(ZoneIncome z);
std::string_view to_string(Service s);
std::string_view to_string(Day d);
std::string_view to_string(Outcome o);
/// Table-style service label ("G&D" rather than "GD").
std::string_view display_name(Service s);

std::optional<Gender> parse_gender(std::string_view s);
std::optional<ZoneIncome> parse_zone_income(std::string_view s);
std::optional<Service> parse_service(std::string_view s);
std::optional<Day> parse_day(std::string_view s);
std::optional<Outcome> parse_outcome(std::string_view s);

struct AppointmentRecord {
  RecordId record_id = 0;
  Gender gender = Gender::Female;
  int age_years = 0;
  std::string zone_id;
  ZoneIncome zone_income = ZoneIncome::Low;
  Service service = Service::OH;
  std::string facility_id;
  int lead_time_days = 0;
  int month = 1;
  Day day_of_week = Day::Mon;
  Outcome outcome = Outcome::Show;

  int label() const { return outcome == Outcome::NoShow ? 1 : 0; }
  bool operator==(const AppointmentRecord&) const = default;
};

inline constexpr int kMaxAge = 120;
inline constexpr int kMaxLeadTime = 1000;

/// Checks the per-record invariants; returns a reason on failure.
std::optional<std::string> check_record(const AppointmentRecord& r);

/// Immutable collection of validated records with unique ids.
class RecordSet {
 public:
  RecordSet() = default;
  explicit RecordSet(std::vector<AppointmentRecord> records);

  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const AppointmentRecord& operator[](std::size_t i) const { return records_[i]; }
  std::span<const AppointmentRecord> records() const { return records_; }
  auto begin() const { return records_.begin(); }
  auto end() const { return records_.end(); }

  std::vector<int> labels() const;
  RecordSet filter_service(Service s) const;
  RecordSet subset(std::span<const std::size_t> indices) const;
  std::optional<std::size_t> find(RecordId id) const;

 private:
  std::vector<AppointmentRecord> records_;
};

struct RowReject {
  std::size_t line = 0;  // 1-based, header is line 1
  std::string reason;
};

struct IngestResult {
  RecordSet records;
  std::vector<RowReject> rejects;
};

/// zone_id -> shares of income strata 1..6.
using ZoneStrata = std::map<std::string, std::vector<double>>;

IngestResult ingest_csv(const std::string& path, const ZoneStrata* strata = nullptr);
IngestResult parse_csv(std::istream& in, const ZoneStrata* strata = nullptr);
void write_csv(std::ostream& out, const RecordSet& records);
void write_csv(const std::string& path, const RecordSet& records);

ZoneStrata read_zone_strata(std::istream& in);
ZoneStrata read_zone_strata(const std::string& path);

/// Low income iff the lowest two strata hold at least half of the population.
ZoneIncome classify_zone_income(std::span<const double> strata_shares);

/// Association between two categorical sequences, in [0, 1].
double cramers_v(std::span<const std::string> a, std::span<const std::string> b);
/// Same statistic from a contingency table of counts.
double cramers_v(const Matrix& contingency);

struct RateRow {
  std::string service;  // display name, or "Total"
  std::string level;
  std::int64_t n_show = 0;
  std::int64_t n_no_show = 0;
  double rate = 0.0;
};

enum class Variable { Gender, Age, Zone, ZoneIncome, Service, Facility, LeadTime, Month, Day };

std::string_view to_string(Variable v);
std::optional<Variable> parse_variable(std::string_view s);

class BinSpec;

/// No-show rate per level of `group_by`, per service present and overall.
/// Age and lead time need a BinSpec; the other variables use raw levels.
std::vector<RateRow> marginal_rates(const RecordSet& records, Variable group_by,
                                    const BinSpec* bins = nullptr);

std::pair<RecordSet, RecordSet> split(const RecordSet& records, double train_fraction,
                                      bool stratify, std::uint64_t seed);

struct ClassWeights {
  double w_show = 1.0;
  double w_no_show = 1.0;

  double of(int label) const { return label == 1 ? w_no_show : w_show; }
  bool operator==(const ClassWeights&) const = default;
};

/// Balanced weights w_c = n / (2 n_c).
ClassWeights class_weights(std::span<const int> labels);
ClassWeights class_weights(const Vector& labels);

}  // namespace noshow::data
