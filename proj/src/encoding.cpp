#include "noshow/encoding.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace noshow::data {

namespace {

std::vector<std::string> fixed_levels(Variable v) {
  switch (v) {
    case Variable::Gender: return {"F", "M"};
    case Variable::ZoneIncome: return {"low", "medium"};
    case Variable::Service: return {"OH", "GD", "YAP", "SP"};
    case Variable::Day: return {"SUN", "MON", "TUE", "WED", "THU", "FRI", "SAT"};
    case Variable::Month: {
      std::vector<std::string> out;
      for (int m = 1; m <= 12; ++m) out.push_back(std::to_string(m));
      return out;
    }
    default: return {};
  }
}

std::string interaction_name(const Interaction& in) {
  return std::string(to_string(in.first)) + "*" + std::string(to_string(in.second));
}

}  // namespace

std::vector<Variable> default_variables() {
  return {Variable::Gender, Variable::Age,   Variable::ZoneIncome, Variable::LeadTime,
          Variable::Month,  Variable::Day,   Variable::Facility};
}

FeatureSchema::FeatureSchema(std::vector<VariableLevels> variables, std::vector<BinSpec> bins,
                             std::vector<Interaction> interactions)
    : variables_(std::move(variables)),
      bins_(std::move(bins)),
      interactions_(std::move(interactions)) {
  std::set<Variable> seen;
  for (const auto& v : variables_) {
    require(seen.insert(v.variable).second, ErrorKind::Schema,
            "variable listed twice: " + std::string(to_string(v.variable)));
    require(!v.levels.empty(), ErrorKind::Schema,
            "variable without levels: " + std::string(to_string(v.variable)));
    require(v.reference < static_cast<int>(v.levels.size()), ErrorKind::Schema,
            "reference index out of range");
    if (v.variable == Variable::Age || v.variable == Variable::LeadTime) {
      require(bins_for(v.variable) != nullptr, ErrorKind::Schema,
              "missing BinSpec for " + std::string(to_string(v.variable)));
    }
  }

  std::set<std::string> names;
  int next = 0;
  for (const auto& v : variables_) {
    const int first = next;
    for (std::size_t l = 0; l < v.levels.size(); ++l) {
      Column c{std::string(to_string(v.variable)), v.levels[l], static_cast<int>(l) == v.reference};
      require(names.insert(c.name()).second, ErrorKind::Schema, "duplicate column " + c.name());
      columns_.push_back(c);
      if (!c.dropped) {
        retained_.push_back(c);
        ++next;
      }
    }
    blocks_.emplace_back(first, next);
  }
  for (const auto& in : interactions_) {
    auto find = [&](Variable v) {
      auto it = std::find_if(variables_.begin(), variables_.end(),
                             [&](const VariableLevels& x) { return x.variable == v; });
      require(it != variables_.end(), ErrorKind::Schema,
              "interaction with unencoded variable " + std::string(to_string(v)));
      return it;
    };
    require(in.first != in.second, ErrorKind::Schema, "interaction of a variable with itself");
    const auto& a = *find(in.first);
    const auto& b = *find(in.second);
    const int first = next;
    for (std::size_t i = 0; i < a.levels.size(); ++i) {
      if (static_cast<int>(i) == a.reference) continue;
      for (std::size_t j = 0; j < b.levels.size(); ++j) {
        if (static_cast<int>(j) == b.reference) continue;
        Column c{interaction_name(in), a.levels[i] + "*" + b.levels[j], false};
        require(names.insert(c.name()).second, ErrorKind::Schema, "duplicate column " + c.name());
        columns_.push_back(c);
        retained_.push_back(c);
        ++next;
      }
    }
    blocks_.emplace_back(first, next);
  }
}

bool FeatureSchema::drops_reference() const {
  return std::any_of(variables_.begin(), variables_.end(),
                     [](const VariableLevels& v) { return v.reference >= 0; });
}

std::vector<std::string> FeatureSchema::column_names() const {
  std::vector<std::string> out;
  out.reserve(retained_.size());
  for (const auto& c : retained_) out.push_back(c.name());
  return out;
}

const BinSpec* FeatureSchema::bins_for(Variable v) const {
  for (const auto& b : bins_) {
    if (b.variable() == v) return &b;
  }
  return nullptr;
}

std::string FeatureSchema::level_of(const AppointmentRecord& r, Variable v) const {
  switch (v) {
    case Variable::Gender: return std::string(to_string(r.gender));
    case Variable::Age: return bins_for(v)->label_of(r.age_years);
    case Variable::Zone: return r.zone_id;
    case Variable::ZoneIncome: return std::string(to_string(r.zone_income));
    case Variable::Service: return std::string(to_string(r.service));
    case Variable::Facility: return r.facility_id;
    case Variable::LeadTime: return bins_for(v)->label_of(r.lead_time_days);
    case Variable::Month: return std::to_string(r.month);
    case Variable::Day: return std::string(to_string(r.day_of_week));
  }
  return {};
}

std::vector<BinSpec> fit_bins(const RecordSet& records, const CoarseClassOptions& options) {
  std::vector<int> ages, leads;
  ages.reserve(records.size());
  leads.reserve(records.size());
  for (const auto& r : records) {
    ages.push_back(r.age_years);
    leads.push_back(r.lead_time_days);
  }
  const auto labels = records.labels();
  return {coarse_class(Variable::Age, ages, labels, options),
          coarse_class(Variable::LeadTime, leads, labels, options)};
}

FeatureSchema fit_schema(const RecordSet& records, const std::vector<BinSpec>& bins,
                         const EncodeOptions& options) {
  require(!records.empty(), ErrorKind::Validation, "fit_schema: empty record set");
  // a temporary schema gives access to level_of() with the bins
  FeatureSchema probe({}, bins, {});
  std::vector<VariableLevels> variables;
  for (Variable v : options.variables) {
    VariableLevels vl;
    vl.variable = v;
    std::map<std::string, std::size_t> freq;
    for (const auto& r : records) ++freq[probe.level_of(r, v)];
    if (v == Variable::Age || v == Variable::LeadTime) {
      const BinSpec* b = probe.bins_for(v);
      require(b != nullptr, ErrorKind::Schema, "missing BinSpec for " + std::string(to_string(v)));
      vl.levels = b->labels();
    } else if (auto fixed = fixed_levels(v); !fixed.empty()) {
      vl.levels = std::move(fixed);
    } else {
      for (const auto& [name, _] : freq) vl.levels.push_back(name);
    }
    if (options.drop_reference && vl.levels.size() > 1) {
      // most frequent level; ties go to the lexicographically smallest name
      std::string best;
      std::size_t best_count = 0;
      for (const auto& [name, count] : freq) {
        if (count > best_count) {
          best = name;
          best_count = count;
        }
      }
      vl.reference = static_cast<int>(
          std::find(vl.levels.begin(), vl.levels.end(), best) - vl.levels.begin());
    }
    variables.push_back(std::move(vl));
  }
  return FeatureSchema(std::move(variables), bins, options.interactions);
}

Vector encode_row(const AppointmentRecord& record, const FeatureSchema& schema) {
  Vector row = Vector::Zero(schema.width());
  const auto& vars = schema.variables();
  for (std::size_t k = 0; k < vars.size(); ++k) {
    const auto& v = vars[k];
    const std::string level = schema.level_of(record, v.variable);
    auto it = std::find(v.levels.begin(), v.levels.end(), level);
    if (it == v.levels.end()) {
      throw Error(ErrorKind::Encoding, "unseen level '" + level + "' for variable " +
                                           std::string(to_string(v.variable)));
    }
    const int l = static_cast<int>(it - v.levels.begin());
    if (l == v.reference) continue;
    const int offset = l - (v.reference >= 0 && l > v.reference ? 1 : 0);
    row[schema.block(k).first + offset] = 1.0;
  }
  for (std::size_t q = 0; q < schema.interactions().size(); ++q) {
    const auto& [va, vb] = schema.interactions()[q];
    auto index_of = [&](Variable v) {
      return static_cast<std::size_t>(
          std::find_if(vars.begin(), vars.end(),
                       [&](const VariableLevels& x) { return x.variable == v; }) -
          vars.begin());
    };
    const std::size_t ia = index_of(va), ib = index_of(vb);
    const auto [a_first, a_last] = schema.block(ia);
    const auto [b_first, b_last] = schema.block(ib);
    const int b_width = b_last - b_first;
    const int first = schema.interaction_block(q).first;
    for (int i = a_first; i < a_last; ++i) {
      for (int j = b_first; j < b_last; ++j) {
        row[first + (i - a_first) * b_width + (j - b_first)] = row[i] * row[j];
      }
    }
  }
  return row;
}

DesignMatrix encode(const RecordSet& records, std::shared_ptr<const FeatureSchema> schema) {
  require(schema != nullptr, ErrorKind::Schema, "encode: null schema");
  DesignMatrix out;
  const auto n = static_cast<Eigen::Index>(records.size());
  out.rows.resize(n, schema->width());
  out.labels.resize(n);
  out.row_ids.reserve(records.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = records[static_cast<std::size_t>(i)];
    out.rows.row(i) = encode_row(r, *schema).transpose();
    out.labels[i] = r.label();
    out.row_ids.push_back(r.record_id);
  }
  out.schema = std::move(schema);
  return out;
}

DesignMatrix encode(const RecordSet& records, const std::vector<BinSpec>& bins,
                    bool drop_reference, const std::vector<Interaction>& interactions) {
  EncodeOptions options;
  options.drop_reference = drop_reference;
  options.interactions = interactions;
  auto schema = std::make_shared<const FeatureSchema>(fit_schema(records, bins, options));
  return encode(records, std::move(schema));
}

DesignMatrix DesignMatrix::subset(std::span<const std::size_t> indices) const {
  DesignMatrix out;
  const auto m = static_cast<Eigen::Index>(indices.size());
  out.rows.resize(m, rows.cols());
  out.labels.resize(m);
  out.row_ids.reserve(indices.size());
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto src = static_cast<Eigen::Index>(indices[static_cast<std::size_t>(i)]);
    out.rows.row(i) = rows.row(src);
    out.labels[i] = labels[src];
    out.row_ids.push_back(row_ids[static_cast<std::size_t>(src)]);
  }
  out.schema = schema;
  return out;
}

std::map<Variable, std::string> decode_row(const FeatureSchema& schema,
                                           const Eigen::Ref<const Vector>& row) {
  require(row.size() == schema.width(), ErrorKind::Dimension, "decode_row: width mismatch");
  std::map<Variable, std::string> out;
  const auto& vars = schema.variables();
  for (std::size_t k = 0; k < vars.size(); ++k) {
    const auto& v = vars[k];
    const auto [first, last] = schema.block(k);
    int hot = -1;
    for (int c = first; c < last; ++c) {
      if (row[c] != 0.0) {
        require(hot < 0, ErrorKind::Encoding,
                "row has two active levels for " + std::string(to_string(v.variable)));
        hot = c - first;
      }
    }
    if (hot < 0) {
      require(v.reference >= 0, ErrorKind::Encoding,
              "row has no active level for " + std::string(to_string(v.variable)));
      out[v.variable] = v.levels[static_cast<std::size_t>(v.reference)];
    } else {
      const int l = hot + (v.reference >= 0 && hot >= v.reference ? 1 : 0);
      out[v.variable] = v.levels[static_cast<std::size_t>(l)];
    }
  }
  return out;
}

}  // namespace noshow::data
