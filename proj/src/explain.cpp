#include "noshow/explain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace noshow::explain {

namespace {

double stabilize(double z, double epsilon) { return z + (z >= 0.0 ? epsilon : -epsilon); }

}  // namespace

RelevanceMap lrp(const neural::MlpModel& model, const data::FeatureSchema& schema,
                 const Eigen::Ref<const Vector>& x, RecordId record_id, double epsilon) {
  require(schema.width() == model.inputs(), ErrorKind::Dimension,
          "lrp: schema width " + std::to_string(schema.width()) + " != model width " +
              std::to_string(model.inputs()));
  require(epsilon >= 0.0, ErrorKind::Validation, "lrp: negative epsilon");
  const neural::Forward f = neural::forward(model, x);
  require(x.allFinite() && f.hidden_pre.allFinite() && std::isfinite(f.output_pre),
          ErrorKind::Propagation, "lrp: non-finite activation for record " + std::to_string(record_id));

  RelevanceMap m;
  m.record_id = record_id;
  m.probability = f.probability;
  m.output_relevance = f.output_pre;

  const double out_scale = m.output_relevance / stabilize(f.output_pre, epsilon);
  const Vector hidden_rel = f.hidden_post.cwiseProduct(model.W2) * out_scale;
  double bias = model.b2 * out_scale;

  Vector hidden_scale(model.hidden());
  for (int j = 0; j < model.hidden(); ++j) {
    hidden_scale[j] = hidden_rel[j] / stabilize(f.hidden_pre[j], epsilon);
    bias += model.b1[j] * hidden_scale[j];
  }
  m.per_column = x.cwiseProduct(model.W1.transpose() * hidden_scale);
  m.bias_absorption = bias;
  require(m.per_column.allFinite(), ErrorKind::Propagation,
          "lrp: non-finite relevance for record " + std::to_string(record_id));

  for (int c = 0; c < schema.width(); ++c) {
    const std::string& v = schema.source_of(c);
    if (m.per_variable.empty() || m.per_variable.back().first != v) m.per_variable.emplace_back(v, 0.0);
    m.per_variable.back().second += m.per_column[c];
  }
  return m;
}

HeatmapTable relevance_heatmap(const std::vector<RelevanceMap>& maps) {
  require(!maps.empty(), ErrorKind::Validation, "relevance_heatmap: no relevance maps");
  std::vector<std::string> names;
  for (const auto& [v, r] : maps.front().per_variable) names.push_back(v);
  for (const auto& m : maps) {
    bool same = m.per_variable.size() == names.size();
    for (std::size_t k = 0; same && k < names.size(); ++k) same = m.per_variable[k].first == names[k];
    require(same, ErrorKind::Schema, "relevance_heatmap: maps come from different schemas");
  }

  std::vector<std::size_t> order(maps.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (maps[a].probability != maps[b].probability) return maps[a].probability > maps[b].probability;
    return maps[a].record_id < maps[b].record_id;
  });

  std::vector<std::size_t> kept;
  for (std::size_t k = 0; k < names.size(); ++k) {
    const bool any = std::any_of(maps.begin(), maps.end(),
                                 [&](const RelevanceMap& m) { return m.per_variable[k].second != 0.0; });
    if (any) kept.push_back(k);
  }

  HeatmapTable t;
  t.cells.resize(static_cast<Eigen::Index>(kept.size()), static_cast<Eigen::Index>(maps.size()));
  for (std::size_t r = 0; r < kept.size(); ++r) t.variables.push_back(names[kept[r]]);
  for (std::size_t c = 0; c < order.size(); ++c) {
    const auto& m = maps[order[c]];
    t.record_ids.push_back(m.record_id);
    t.probabilities.push_back(m.probability);
    for (std::size_t r = 0; r < kept.size(); ++r)
      t.cells(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = m.per_variable[kept[r]].second;
  }
  return t;
}

void HeatmapTable::write_csv(std::ostream& out) const {
  const auto old = out.precision(17);
  out << "variable";
  for (RecordId id : record_ids) out << ',' << id;
  out << "\nprobability";
  for (double p : probabilities) out << ',' << p;
  out << '\n';
  for (Eigen::Index r = 0; r < cells.rows(); ++r) {
    out << variables[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < cells.cols(); ++c) out << ',' << cells(r, c);
    out << '\n';
  }
  out.precision(old);
}

}  // namespace noshow::explain
