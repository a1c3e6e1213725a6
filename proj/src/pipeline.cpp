#include "noshow/pipeline.hpp"

#include "noshow/binning.hpp"
#include "noshow/rng.hpp"

namespace noshow::pipeline {

std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Linear: return "linear";
    case ModelKind::Forest: return "forest";
    case ModelKind::Mlp: return "mlp";
  }
  return "linear";
}

std::string_view short_name(ModelKind k) {
  switch (k) {
    case ModelKind::Linear: return "LR";
    case ModelKind::Forest: return "RF";
    case ModelKind::Mlp: return "NN";
  }
  return "LR";
}

ModelKind parse_model_kind(std::string_view s) {
  if (s == "linear" || s == "lr") return ModelKind::Linear;
  if (s == "forest" || s == "rf") return ModelKind::Forest;
  if (s == "mlp" || s == "nn") return ModelKind::Mlp;
  throw Error(ErrorKind::Validation, "unknown model kind '" + std::string(s) + "' (linear, forest or mlp)");
}

std::string ModelBundle::tag() const {
  std::string svc = service;
  if (auto s = data::parse_service(service)) svc = std::string(data::display_name(*s));
  return svc + "/" + std::string(short_name(kind));
}

Vector ModelBundle::predict(const Matrix& rows) const {
  return std::visit([&](const auto& m) { return predict_proba(m, rows); }, model);
}

Vector ModelBundle::score(const data::RecordSet& records) const {
  return predict(data::encode(records, schema).rows);
}

namespace {

std::vector<eval::ScoredRecord> scored(const data::RecordSet& records, const Vector& p) {
  std::vector<eval::ScoredRecord> out(records.size());
  for (std::size_t i = 0; i < records.size(); ++i)
    out[i] = {records[i].record_id, p[static_cast<Eigen::Index>(i)]};
  return out;
}

std::map<RecordId, int> label_map(const data::RecordSet& records) {
  std::map<RecordId, int> out;
  for (const auto& r : records) out[r.record_id] = r.label();
  return out;
}

}  // namespace

ModelBundle train_model(const data::RecordSet& all, const TrainOptions& opt) {
  require(opt.folds >= 2 && opt.repetitions >= 1, ErrorKind::Validation,
          "train: folds >= 2 and repetitions >= 1 required");
  ModelBundle b;
  b.kind = opt.kind;
  b.seed = opt.seed;
  data::RecordSet records = all;
  if (opt.service) {
    records = all.filter_service(*opt.service);
    b.service = std::string(data::to_string(*opt.service));
  }
  require(records.size() >= 20, ErrorKind::Validation,
          "train: need at least 20 records, got " + std::to_string(records.size()));

  auto [train, test] = data::split(records, opt.train_fraction, true, substream_seed(opt.seed, {0x5b1}));
  const auto bins = data::fit_bins(train);
  data::EncodeOptions enc;
  enc.drop_reference = opt.kind == ModelKind::Linear;
  enc.interactions = opt.interactions;
  b.schema = std::make_shared<const data::FeatureSchema>(data::fit_schema(train, bins, enc));
  const data::DesignMatrix X = data::encode(train, b.schema);
  const data::ClassWeights w = data::class_weights(X.labels);

  const std::uint64_t search_seed = substream_seed(opt.seed, {0x5ea});
  const std::uint64_t fit_seed = substream_seed(opt.seed, {0xf17});
  const std::uint64_t cv_seed = substream_seed(opt.seed, {0xc5});
  const std::string tag_probe = [&] {
    ModelBundle t;
    t.kind = b.kind;
    t.service = b.service;
    return t.tag();
  }();

  eval::Trainer trainer;
  switch (opt.kind) {
    case ModelKind::Linear: {
      const auto path = linear::penalty_path(X, w, opt.folds, search_seed);
      const double lambda = linear::select_penalty(path);
      b.model = linear::fit_l1_logistic(X, lambda, w);
      b.hyperparameters = {{"lambda", lambda}, {"path", io::to_json(path)}};
      trainer = [lambda, w](const data::DesignMatrix& tr, const data::DesignMatrix& te, std::uint64_t) {
        return linear::predict_proba(linear::fit_l1_logistic(tr, lambda, w), te.rows);
      };
      break;
    }
    case ModelKind::Forest: {
      const auto grid = opt.full_grid ? forest::ForestGrid::full() : forest::ForestGrid::fast();
      const auto search = forest::grid_search_rf(X, w, opt.folds, search_seed, grid);
      const forest::ForestParams params = search.best;
      b.model = forest::fit_forest(X, w, params, fit_seed);
      b.hyperparameters = {{"params", io::to_json(params)}, {"grid_cells", search.cells.size()}};
      trainer = [params, w](const data::DesignMatrix& tr, const data::DesignMatrix& te, std::uint64_t s) {
        return forest::predict_proba(forest::fit_forest(tr, w, params, s), te.rows);
      };
      break;
    }
    case ModelKind::Mlp: {
      const auto grid = opt.full_grid ? neural::NnGrid::full(X.width()) : neural::NnGrid::fast(X.width());
      const auto search = neural::grid_search_nn(X, w, opt.folds, search_seed, grid);
      const int hidden = search.hidden;
      const neural::TrainConfig config = search.config;
      b.model = neural::train(neural::init_mlp(X.width(), hidden, fit_seed), X, config).model;
      b.hyperparameters = {{"hidden", hidden}, {"train_config", io::to_json(config)}, {"grid_cells", search.cells.size()}};
      trainer = [hidden, config](const data::DesignMatrix& tr, const data::DesignMatrix& te, std::uint64_t s) {
        return neural::predict_proba(neural::train(neural::init_mlp(tr.width(), hidden, s), tr, config).model,
                                     te.rows);
      };
      break;
    }
  }
  b.cv_report = eval::cross_validate(trainer, X, opt.folds, opt.repetitions, cv_seed, tag_probe);

  const auto n_pos = std::count_if(test.begin(), test.end(), [](const auto& r) { return r.label() == 1; });
  if (n_pos > 0 && n_pos < static_cast<std::ptrdiff_t>(test.size())) {
    const Evaluation e = evaluate(b, test, opt.fractions);
    b.test = TestMetrics{e.n, e.auroc, e.policy, e.metrics};
  }
  return b;
}

Evaluation evaluate(const ModelBundle& bundle, const data::RecordSet& records, const eval::Fractions& fractions) {
  require(!records.empty(), ErrorKind::Validation, "evaluate: no records");
  const Vector p = bundle.score(records);
  const auto labels = records.labels();
  Evaluation e;
  e.n = records.size();
  e.auroc = eval::auroc(std::span<const double>(p.data(), records.size()), labels);
  const auto s = scored(records, p);
  e.policy = eval::tune_cutoffs(s, fractions);
  e.metrics = eval::coverage_risk(eval::assign_groups(s, e.policy), label_map(records));
  e.metrics.model_tag = bundle.tag();
  return e;
}

eval::InterventionMetrics apply_policy(const ModelBundle& bundle, const data::RecordSet& records,
                                       const eval::CutoffPolicy& policy) {
  const auto s = scored(records, bundle.score(records));
  auto m = eval::coverage_risk(eval::assign_groups(s, policy), label_map(records));
  m.model_tag = bundle.tag();
  return m;
}

explain::RelevanceMap explain_record(const ModelBundle& bundle, const data::AppointmentRecord& record) {
  const auto* mlp = std::get_if<neural::MlpModel>(&bundle.model);
  require(mlp != nullptr, ErrorKind::Validation,
          "explanations are available for mlp models only, not " + std::string(to_string(bundle.kind)));
  return explain::lrp(*mlp, *bundle.schema, data::encode_row(record, *bundle.schema), record.record_id);
}

io::Json to_json(const Evaluation& e) {
  return {{"n", e.n}, {"auroc", e.auroc}, {"policy", io::to_json(e.policy)}, {"metrics", io::to_json(e.metrics)},
          {"coverage", e.metrics.coverage}, {"risk", e.metrics.risk}};
}

io::Json to_json(const ModelBundle& b) {
  io::Json j = {{"schema_version", data::kSchemaVersion},
                {"kind", to_string(b.kind)},
                {"service", b.service},
                {"tag", b.tag()},
                {"seed", b.seed},
                {"feature_schema", io::to_json(*b.schema)},
                {"hyperparameters", b.hyperparameters},
                {"cv_report", io::to_json(b.cv_report)}};
  j["model"] = std::visit([](const auto& m) { return io::to_json(m); }, b.model);
  if (b.test) {
    j["test"] = {{"n", b.test->n},
                 {"auroc", b.test->auroc},
                 {"policy", io::to_json(b.test->policy)},
                 {"metrics", io::to_json(b.test->metrics)}};
  }
  return j;
}

ModelBundle bundle_from_json(const io::Json& j) {
  require(j.is_object() && j.value("schema_version", -1) == data::kSchemaVersion, ErrorKind::Schema,
          "model file: unsupported or missing schema_version");
  try {
    ModelBundle b;
    b.kind = parse_model_kind(j.at("kind").get<std::string>());
    b.service = j.at("service").get<std::string>();
    b.seed = j.at("seed").get<std::uint64_t>();
    b.schema = std::make_shared<const data::FeatureSchema>(io::schema_from_json(j.at("feature_schema")));
    b.hyperparameters = j.at("hyperparameters");
    b.cv_report = io::cv_report_from_json(j.at("cv_report"));
    const auto& m = j.at("model");
    switch (b.kind) {
      case ModelKind::Linear: {
        auto lm = io::linear_from_json(m);
        lm.schema = b.schema;
        b.model = std::move(lm);
        break;
      }
      case ModelKind::Forest: {
        auto fm = io::forest_from_json(m);
        fm.schema = b.schema;
        b.model = std::move(fm);
        break;
      }
      case ModelKind::Mlp: {
        auto mm = io::mlp_from_json(m);
        require(mm.inputs() == b.schema->width(), ErrorKind::Schema, "model file: network width != schema width");
        b.model = std::move(mm);
        break;
      }
    }
    if (j.contains("test")) {
      const auto& t = j.at("test");
      b.test = TestMetrics{t.at("n").get<std::size_t>(), t.at("auroc").get<double>(),
                           io::policy_from_json(t.at("policy")), io::metrics_from_json(t.at("metrics"))};
    }
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Schema, std::string("model file: ") + e.what());
  }
}

void save(const ModelBundle& bundle, const std::string& path) { io::write_json_file(path, to_json(bundle)); }

ModelBundle load(const std::string& path) { return bundle_from_json(io::read_json_file(path)); }

}  // namespace noshow::pipeline
