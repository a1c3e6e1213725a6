#include "noshow/serialization.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace noshow::io {

namespace {

void check_version(const Json& j, const char* what) {
  require(j.is_object(), ErrorKind::Schema, std::string(what) + ": expected a JSON object");
  const int v = j.value("schema_version", -1);
  require(v == data::kSchemaVersion, ErrorKind::Schema,
          std::string(what) + ": unsupported schema_version " + std::to_string(v));
}

template <typename F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Schema, std::string(what) + ": " + e.what());
  }
}

Json vector_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vector vector_from(const Json& a) {
  Vector v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

Json matrix_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vector_json(m.row(r).transpose()));
  return rows;
}

Matrix matrix_from(const Json& rows, Eigen::Index n_rows, Eigen::Index n_cols) {
  require(rows.size() == static_cast<std::size_t>(n_rows), ErrorKind::Schema, "matrix: row count mismatch");
  Matrix m(n_rows, n_cols);
  for (Eigen::Index r = 0; r < n_rows; ++r) {
    const Json& row = rows[static_cast<std::size_t>(r)];
    require(row.size() == static_cast<std::size_t>(n_cols), ErrorKind::Schema, "matrix: column count mismatch");
    for (Eigen::Index c = 0; c < n_cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

data::Variable variable_from(const Json& j) {
  const auto name = j.get<std::string>();
  auto v = data::parse_variable(name);
  require(v.has_value(), ErrorKind::Schema, "unknown variable '" + name + "'");
  return *v;
}

std::string name_of(data::Variable v) { return std::string(data::to_string(v)); }

Json distribution_json(const synth::LevelDistribution& d) {
  return {{"levels", d.levels}, {"weights", d.weights}};
}

synth::LevelDistribution distribution_from(const Json& j) {
  return {j.at("levels").get<std::vector<std::string>>(), j.at("weights").get<std::vector<double>>()};
}

}  // namespace

Json to_json(const data::BinSpec& bins) {
  return {{"variable", name_of(bins.variable())}, {"cut_points", bins.cut_points()}};
}

data::BinSpec bin_spec_from_json(const Json& j) {
  return guarded("bin spec", [&] {
    return data::BinSpec(variable_from(j.at("variable")), j.at("cut_points").get<std::vector<int>>());
  });
}

Json to_json(const data::FeatureSchema& schema) {
  Json vars = Json::array();
  for (const auto& v : schema.variables())
    vars.push_back({{"variable", name_of(v.variable)}, {"levels", v.levels}, {"reference", v.reference}});
  Json bins = Json::array();
  for (const auto& b : schema.bins()) bins.push_back(to_json(b));
  Json inter = Json::array();
  for (const auto& [a, b] : schema.interactions()) inter.push_back({name_of(a), name_of(b)});
  return {{"schema_version", data::kSchemaVersion},
          {"variables", vars},
          {"bins", bins},
          {"interactions", inter},
          {"columns", schema.column_names()}};
}

data::FeatureSchema schema_from_json(const Json& j) {
  check_version(j, "feature schema");
  return guarded("feature schema", [&] {
    std::vector<data::VariableLevels> vars;
    for (const auto& v : j.at("variables"))
      vars.push_back({variable_from(v.at("variable")), v.at("levels").get<std::vector<std::string>>(),
                      v.at("reference").get<int>()});
    std::vector<data::BinSpec> bins;
    for (const auto& b : j.at("bins")) bins.push_back(bin_spec_from_json(b));
    std::vector<data::Interaction> inter;
    for (const auto& p : j.at("interactions")) inter.emplace_back(variable_from(p.at(0)), variable_from(p.at(1)));
    data::FeatureSchema schema(std::move(vars), std::move(bins), std::move(inter));
    if (j.contains("columns"))
      require(j.at("columns").get<std::vector<std::string>>() == schema.column_names(), ErrorKind::Schema,
              "feature schema: stored column names do not match the rebuilt layout");
    return schema;
  });
}

Json to_json(const linear::FittedLinearModel& model) {
  require(model.schema != nullptr, ErrorKind::Schema, "linear model without a feature schema");
  return {{"schema_version", data::kSchemaVersion},
          {"kind", "linear"},
          {"feature_schema", to_json(*model.schema)},
          {"intercept", model.intercept},
          {"coefficients", vector_json(model.coefficients)},
          {"penalty_lambda", model.penalty_lambda}};
}

linear::FittedLinearModel linear_from_json(const Json& j) {
  check_version(j, "linear model");
  return guarded("linear model", [&] {
    linear::FittedLinearModel m;
    m.schema = std::make_shared<const data::FeatureSchema>(schema_from_json(j.at("feature_schema")));
    m.intercept = j.at("intercept").get<double>();
    m.coefficients = vector_from(j.at("coefficients"));
    m.penalty_lambda = j.at("penalty_lambda").get<double>();
    require(m.coefficients.size() == m.schema->width(), ErrorKind::Schema,
            "linear model: coefficient count does not match the schema width");
    return m;
  });
}

Json to_json(const forest::ForestParams& p) {
  return {{"n_trees", p.n_trees},
          {"mtry", p.mtry},
          {"min_samples_leaf_frac", p.min_samples_leaf_frac},
          {"min_impurity_decrease", p.min_impurity_decrease}};
}

forest::ForestParams forest_params_from_json(const Json& j) {
  return guarded("forest params", [&] {
    return forest::ForestParams{j.at("n_trees").get<int>(), j.at("mtry").get<int>(),
                                j.at("min_samples_leaf_frac").get<double>(),
                                j.at("min_impurity_decrease").get<double>()};
  });
}

Json to_json(const forest::ForestModel& model) {
  require(model.schema != nullptr, ErrorKind::Schema, "forest without a feature schema");
  Json trees = Json::array();
  for (const auto& t : model.trees) {
    // one array per node: column, threshold, left, right, mass_show, mass_no_show
    Json nodes = Json::array();
    for (const auto& n : t.nodes)
      nodes.push_back({n.column, n.threshold, n.left, n.right, n.mass_show, n.mass_no_show});
    trees.push_back(std::move(nodes));
  }
  return {{"schema_version", data::kSchemaVersion},
          {"kind", "forest"},
          {"feature_schema", to_json(*model.schema)},
          {"params", to_json(model.params)},
          {"seed", model.seed},
          {"trees", trees}};
}

forest::ForestModel forest_from_json(const Json& j) {
  check_version(j, "forest");
  return guarded("forest", [&] {
    forest::ForestModel m;
    m.schema = std::make_shared<const data::FeatureSchema>(schema_from_json(j.at("feature_schema")));
    m.params = forest_params_from_json(j.at("params"));
    m.seed = j.at("seed").get<std::uint64_t>();
    const int width = m.schema->width();
    for (const auto& t : j.at("trees")) {
      forest::Tree tree;
      for (const auto& n : t) {
        forest::TreeNode node{n.at(0).get<int>(),    n.at(1).get<double>(), n.at(2).get<int>(),
                              n.at(3).get<int>(),    n.at(4).get<double>(), n.at(5).get<double>()};
        tree.nodes.push_back(node);
      }
      const int size = static_cast<int>(tree.nodes.size());
      require(size > 0, ErrorKind::Schema, "forest: empty tree");
      for (const auto& node : tree.nodes) {
        if (node.is_leaf()) continue;
        require(node.column < width && node.left > 0 && node.left < size && node.right > 0 &&
                    node.right < size,
                ErrorKind::Schema, "forest: node references out of range");
      }
      m.trees.push_back(std::move(tree));
    }
    return m;
  });
}

Json to_json(const neural::MlpModel& model) {
  return {{"schema_version", data::kSchemaVersion},
          {"kind", "mlp"},
          {"N", model.inputs()},
          {"H", model.hidden()},
          {"W1", matrix_json(model.W1)},
          {"b1", vector_json(model.b1)},
          {"W2", vector_json(model.W2)},
          {"b2", model.b2},
          {"seed", model.seed}};
}

neural::MlpModel mlp_from_json(const Json& j) {
  check_version(j, "mlp");
  return guarded("mlp", [&] {
    neural::MlpModel m;
    const auto n = j.at("N").get<Eigen::Index>(), h = j.at("H").get<Eigen::Index>();
    m.W1 = matrix_from(j.at("W1"), h, n);
    m.b1 = vector_from(j.at("b1"));
    m.W2 = vector_from(j.at("W2"));
    m.b2 = j.at("b2").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    require(m.b1.size() == h && m.W2.size() == h, ErrorKind::Schema, "mlp: bias or output width mismatch");
    return m;
  });
}

Json to_json(const neural::TrainConfig& c) {
  return {{"n_iterations", c.n_iterations},
          {"learning_rate", c.learning_rate},
          {"class_weights", {{"show", c.weights.w_show}, {"no_show", c.weights.w_no_show}}}};
}

neural::TrainConfig train_config_from_json(const Json& j) {
  return guarded("train config", [&] {
    neural::TrainConfig c;
    c.n_iterations = j.at("n_iterations").get<int>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.weights = {j.at("class_weights").at("show").get<double>(), j.at("class_weights").at("no_show").get<double>()};
    return c;
  });
}

Json to_json(const eval::CvReport& r) {
  return {{"model_tag", r.model_tag}, {"folds", r.folds},         {"repetitions", r.repetitions},
          {"mean", r.mean},           {"std", r.std},             {"fold_scores", r.fold_scores}};
}

eval::CvReport cv_report_from_json(const Json& j) {
  return guarded("cv report", [&] {
    eval::CvReport r;
    r.model_tag = j.at("model_tag").get<std::string>();
    r.folds = j.at("folds").get<int>();
    r.repetitions = j.at("repetitions").get<int>();
    r.fold_scores = j.at("fold_scores").get<std::vector<double>>();
    r.mean = j.at("mean").get<double>();
    r.std = j.at("std").get<double>();
    return r;
  });
}

Json to_json(const eval::Fractions& f) { return {f.a, f.b, f.c}; }

eval::Fractions fractions_from_json(const Json& j) {
  return guarded("fractions", [&] {
    require(j.is_array() && j.size() == 3, ErrorKind::Validation, "fractions: expected three numbers");
    return eval::Fractions{j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
  });
}

namespace {

Json threshold_json(const eval::Threshold& t) {
  Json j = {{"score", t.score}};
  j["tie_id"] = t.tie_id == INT64_MIN ? Json(nullptr) : Json(t.tie_id);
  return j;
}

eval::Threshold threshold_from(const Json& j) {
  eval::Threshold t;
  t.score = j.at("score").get<double>();
  t.tie_id = j.at("tie_id").is_null() ? INT64_MIN : j.at("tie_id").get<RecordId>();
  return t;
}

}  // namespace

Json to_json(const eval::CutoffPolicy& p) {
  return {{"schema_version", data::kSchemaVersion},
          {"fractions", to_json(p.fractions)},
          {"t1", threshold_json(p.t1)},
          {"t2", threshold_json(p.t2)}};
}

eval::CutoffPolicy policy_from_json(const Json& j) {
  check_version(j, "policy");
  return guarded("policy", [&] {
    return eval::CutoffPolicy{fractions_from_json(j.at("fractions")), threshold_from(j.at("t1")),
                              threshold_from(j.at("t2"))};
  });
}

Json to_json(const eval::InterventionMetrics& m) {
  return {{"model_tag", m.model_tag},
          {"coverage", m.coverage},
          {"risk", m.risk},
          {"group_sizes", {{"A", m.group_sizes[0]}, {"B", m.group_sizes[1]}, {"C", m.group_sizes[2]}}},
          {"no_show_counts", {{"A", m.no_show_counts[0]}, {"B", m.no_show_counts[1]}, {"C", m.no_show_counts[2]}}}};
}

eval::InterventionMetrics metrics_from_json(const Json& j) {
  return guarded("metrics", [&] {
    eval::InterventionMetrics m;
    m.model_tag = j.at("model_tag").get<std::string>();
    m.coverage = j.at("coverage").get<double>();
    m.risk = j.at("risk").get<double>();
    const char* keys[] = {"A", "B", "C"};
    for (int g = 0; g < 3; ++g) {
      m.group_sizes[static_cast<std::size_t>(g)] = j.at("group_sizes").at(keys[g]).get<std::int64_t>();
      m.no_show_counts[static_cast<std::size_t>(g)] = j.at("no_show_counts").at(keys[g]).get<std::int64_t>();
    }
    return m;
  });
}

Json to_json(const eval::ComparisonTable& t) {
  Json rows = Json::array();
  for (const auto& r : t.rows)
    rows.push_back({{"service", r.service},
                    {"model", r.model},
                    {"mean_auroc", r.mean_auroc},
                    {"std_auroc", r.std_auroc},
                    {"risk", r.risk},
                    {"coverage", r.coverage}});
  return {{"rows", rows}, {"rendered", t.render_rows()}};
}

Json to_json(const linear::PenaltyPath& path) {
  Json a = Json::array();
  for (const auto& e : path.entries)
    a.push_back({{"lambda", e.lambda},
                 {"mean_cv_auroc", e.mean_cv_auroc},
                 {"std_cv_auroc", e.std_cv_auroc},
                 {"n_nonzero", e.n_nonzero}});
  return a;
}

Json to_json(const linear::OddsRatioTable& table) {
  Json a = Json::array();
  for (const auto& r : table.rows)
    a.push_back({{"column", r.column_name}, {"mean_coefficient", r.mean_coefficient}, {"odds_ratio", r.odds_ratio}});
  return a;
}

Json to_json(const explain::RelevanceMap& m) {
  Json vars = Json::array();
  for (const auto& [v, r] : m.per_variable) vars.push_back({{"variable", v}, {"relevance", r}});
  return {{"record_id", m.record_id},
          {"probability", m.probability},
          {"output_relevance", m.output_relevance},
          {"bias_absorption", m.bias_absorption},
          {"per_column", vector_json(m.per_column)},
          {"per_variable", vars}};
}

Json to_json(const explain::HeatmapTable& t) {
  return {{"record_ids", t.record_ids},
          {"probabilities", t.probabilities},
          {"variables", t.variables},
          {"cells", matrix_json(t.cells)}};
}

Json to_json(const synth::GeneratorSpec& s) {
  Json freq = Json::object();
  for (const auto& [k, d] : s.frequencies) freq[k] = distribution_json(d);
  Json svc_freq = Json::object();
  for (const auto& [svc, m] : s.service_frequencies)
    for (const auto& [k, d] : m) svc_freq[svc][k] = distribution_json(d);
  return {{"schema_version", data::kSchemaVersion},
          {"n", s.n},
          {"seed", s.seed},
          {"service_mix", s.service_mix},
          {"frequencies", freq},
          {"service_frequencies", svc_freq},
          {"zones", s.zones},
          {"true_intercept", s.true_intercept},
          {"true_coefficients", s.true_coefficients},
          {"service_coefficients", s.service_coefficients},
          {"interaction_effects", s.interaction_effects}};
}

synth::GeneratorSpec generator_spec_from_json(const Json& j) {
  check_version(j, "generator spec");
  return guarded("generator spec", [&] {
    synth::GeneratorSpec s = synth::default_spec();
    s.n = j.value("n", s.n);
    s.seed = j.value("seed", s.seed);
    if (j.contains("service_mix")) s.service_mix = j.at("service_mix").get<std::map<std::string, double>>();
    if (j.contains("frequencies"))
      for (const auto& [k, d] : j.at("frequencies").items()) s.frequencies[k] = distribution_from(d);
    if (j.contains("service_frequencies")) {
      s.service_frequencies.clear();
      for (const auto& [svc, m] : j.at("service_frequencies").items())
        for (const auto& [k, d] : m.items()) s.service_frequencies[svc][k] = distribution_from(d);
    }
    if (j.contains("zones")) s.zones = j.at("zones").get<std::map<std::string, std::string>>();
    s.true_intercept = j.value("true_intercept", 0.0);
    if (j.contains("true_coefficients"))
      s.true_coefficients = j.at("true_coefficients").get<std::map<std::string, double>>();
    if (j.contains("service_coefficients"))
      s.service_coefficients =
          j.at("service_coefficients").get<std::map<std::string, std::map<std::string, double>>>();
    if (j.contains("interaction_effects"))
      s.interaction_effects = j.at("interaction_effects").get<std::map<std::string, double>>();
    synth::validate(s);
    return s;
  });
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::Schema, path + ": " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path);
  out << text;
  require(static_cast<bool>(out), ErrorKind::Io, "write failed for " + path);
}

void write_json_file(const std::string& path, const Json& j) { write_text_file(path, dump(j)); }

}  // namespace noshow::io
