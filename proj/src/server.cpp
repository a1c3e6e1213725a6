#include "noshow/server.hpp"

#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <semaphore>
#include <shared_mutex>
#include <sstream>

#include "noshow/detail/httplib.hpp"

#include "noshow/pipeline.hpp"

namespace noshow::service {

namespace fs = std::filesystem;
using io::Json;

namespace {

struct NotFound : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DatasetEntry {
  std::string id;
  std::shared_ptr<const data::RecordSet> records;
};

struct ModelEntry {
  std::string id;
  std::string dataset_id;
  std::string created_at;
  std::string path;
  std::shared_ptr<const pipeline::ModelBundle> bundle;
};

struct CommittedPolicy {
  std::string model_id;
  std::string dataset_id;
  eval::CutoffPolicy policy;
  std::string committed_at;
};

std::string now_utc() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

std::string make_id(const char* prefix, int n) {
  std::ostringstream out;
  out << prefix << '-' << std::setw(4) << std::setfill('0') << n;
  return out.str();
}

int id_number(const std::string& id) {
  const auto dash = id.rfind('-');
  try {
    return dash == std::string::npos ? 0 : std::stoi(id.substr(dash + 1));
  } catch (const std::exception&) {
    return 0;
  }
}

void atomic_write(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  io::write_text_file(tmp.string(), text);
  fs::rename(tmp, path);
}

int status_of(ErrorKind k) {
  switch (k) {
    case ErrorKind::Validation:
    case ErrorKind::Policy:
    case ErrorKind::Metric: return 400;
    case ErrorKind::Schema:
    case ErrorKind::Encoding:
    case ErrorKind::Dimension: return 409;
    default: return 500;
  }
}

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message,
                const Json& detail = nullptr) {
  send_json(res, status, {{"code", code}, {"message", message}, {"detail", detail}});
}

Json parse_body(const httplib::Request& req) {
  try {
    return req.body.empty() ? Json::object() : Json::parse(req.body);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorKind::Validation, std::string("request body is not valid JSON: ") + e.what());
  }
}

std::string param(const httplib::Request& req, const std::string& key, bool required = true) {
  if (req.has_param(key)) return req.get_param_value(key);
  require(!required, ErrorKind::Validation, "missing query parameter '" + key + "'");
  return {};
}

eval::Fractions fractions_of(const Json& j) {
  if (j.is_string()) return eval::parse_fractions(j.get<std::string>());
  if (j.is_object())
    return {j.at("a").get<double>(), j.at("b").get<double>(), j.at("c").get<double>()};
  return io::fractions_from_json(j);
}

std::string field_text(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    require(d == std::floor(d), ErrorKind::Validation, "non-integer value " + v.dump());
    return std::to_string(static_cast<long long>(d));
  }
  throw Error(ErrorKind::Validation, "unsupported field value " + v.dump());
}

// JSON records go through the CSV reader so validation is identical.
data::RecordSet records_from_json(const Json& list) {
  require(list.is_array() && !list.empty(), ErrorKind::Validation, "'records' must be a non-empty array");
  static const std::vector<std::string> columns{"record_id", "gender",         "age_years", "zone_id",
                                                "zone_income", "service",      "facility_id", "lead_time_days",
                                                "month",     "day_of_week",    "outcome"};
  std::ostringstream csv;
  for (std::size_t c = 0; c < columns.size(); ++c) csv << (c ? "," : "") << columns[c];
  csv << '\n';
  for (const auto& r : list) {
    require(r.is_object(), ErrorKind::Validation, "each record must be a JSON object");
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (c) csv << ',';
      if (r.contains(columns[c])) {
        const std::string text = field_text(r.at(columns[c]));
        require(text.find_first_of(",\n\"") == std::string::npos, ErrorKind::Validation,
                "field " + columns[c] + " contains a separator");
        csv << text;
      } else if (columns[c] == "outcome") {
        csv << "show";
      } else {
        throw Error(ErrorKind::Validation, "record is missing '" + columns[c] + "'");
      }
    }
    csv << '\n';
  }
  std::istringstream in(csv.str());
  auto parsed = data::parse_csv(in);
  if (!parsed.rejects.empty())
    throw Error(ErrorKind::Validation, "record " + std::to_string(parsed.rejects.front().line - 2) +
                                           " invalid: " + parsed.rejects.front().reason);
  return parsed.records;
}

}  // namespace

struct ApiServer::State {
  ServerOptions options;
  httplib::Server http;
  std::shared_mutex mutex;
  std::map<std::string, DatasetEntry> datasets;
  std::map<std::string, ModelEntry> models;
  std::optional<CommittedPolicy> policy;
  int next_dataset = 1;
  int next_model = 1;
  std::counting_semaphore<1024> training;

  explicit State(ServerOptions o)
      : options(std::move(o)), training(std::max(1, std::min(1024, options.max_concurrent_training))) {}

  fs::path root() const { return fs::path(options.data_dir); }

  void load() {
    fs::create_directories(root() / "datasets");
    fs::create_directories(root() / "models");
    for (const auto& e : fs::directory_iterator(root() / "datasets")) {
      if (e.path().extension() != ".csv") continue;
      const std::string id = e.path().stem().string();
      auto parsed = data::ingest_csv(e.path().string());
      datasets[id] = {id, std::make_shared<const data::RecordSet>(std::move(parsed.records))};
      next_dataset = std::max(next_dataset, id_number(id) + 1);
    }
    for (const auto& e : fs::directory_iterator(root() / "models")) {
      if (e.path().extension() != ".json") continue;
      const Json j = io::read_json_file(e.path().string());
      const Json& reg = j.at("registry");
      ModelEntry m{reg.at("model_id").get<std::string>(), reg.at("dataset_id").get<std::string>(),
                   reg.at("created_at").get<std::string>(), e.path().string(),
                   std::make_shared<const pipeline::ModelBundle>(pipeline::bundle_from_json(j))};
      next_model = std::max(next_model, id_number(m.id) + 1);
      models[m.id] = std::move(m);
    }
    const fs::path p = root() / "policy.json";
    if (fs::exists(p)) {
      const Json j = io::read_json_file(p.string());
      policy = CommittedPolicy{j.at("model_id").get<std::string>(), j.at("dataset_id").get<std::string>(),
                               io::policy_from_json(j.at("policy")), j.at("committed_at").get<std::string>()};
    }
  }

  DatasetEntry dataset(const std::string& id) {
    std::shared_lock lock(mutex);
    auto it = datasets.find(id);
    if (it == datasets.end()) throw NotFound("unknown dataset '" + id + "'");
    return it->second;
  }

  ModelEntry model(const std::string& id) {
    std::shared_lock lock(mutex);
    auto it = models.find(id);
    if (it == models.end()) throw NotFound("unknown model '" + id + "'");
    return it->second;
  }

  void route();
};

namespace {

template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const NotFound& e) {
      send_error(res, 404, "not_found", e.what());
    } catch (const DivergenceError& e) {
      send_error(res, 500, to_string(e.kind()), e.what(), {{"iteration", e.iteration()}});
    } catch (const ConvergenceError& e) {
      send_error(res, 500, to_string(e.kind()), e.what(), {{"last_objective", e.last_objective()}});
    } catch (const Error& e) {
      send_error(res, status_of(e.kind()), to_string(e.kind()), e.what());
    } catch (const Json::exception& e) {
      send_error(res, 400, "validation_error", std::string("malformed request: ") + e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal_error", e.what());
    }
  };
}

Json scores_json(const data::RecordSet& records, const Vector& p) {
  Json a = Json::array();
  for (std::size_t i = 0; i < records.size(); ++i)
    a.push_back({{"record_id", records[i].record_id}, {"probability", p[static_cast<Eigen::Index>(i)]}});
  return a;
}

Json model_summary(const ModelEntry& m) {
  return {{"model_id", m.id},
          {"kind", pipeline::to_string(m.bundle->kind)},
          {"service", m.bundle->service},
          {"tag", m.bundle->tag()},
          {"dataset_id", m.dataset_id},
          {"created_at", m.created_at},
          {"schema_version", data::kSchemaVersion},
          {"artifact", m.path}};
}

}  // namespace

void ApiServer::State::route() {
  http.Post("/datasets", guarded([this](const httplib::Request& req, httplib::Response& res) {
    std::string text;
    if (req.is_multipart_form_data()) {
      require(!req.files.empty(), ErrorKind::Validation, "multipart upload without a file part");
      text = req.has_file("file") ? req.get_file_value("file").content : req.files.begin()->second.content;
    } else {
      text = req.body;
    }
    std::istringstream in(text);
    auto parsed = data::parse_csv(in);
    Json rejects = Json::array();
    for (const auto& r : parsed.rejects) rejects.push_back({{"line", r.line}, {"reason", r.reason}});
    require(!parsed.records.empty(), ErrorKind::Validation, "dataset has no valid records");
    auto records = std::make_shared<const data::RecordSet>(std::move(parsed.records));
    std::unique_lock lock(mutex);
    const std::string id = make_id("ds", next_dataset++);
    std::ostringstream csv;
    data::write_csv(csv, *records);
    atomic_write(root() / "datasets" / (id + ".csv"), csv.str());
    datasets[id] = {id, records};
    lock.unlock();
    const auto labels = records->labels();
    send_json(res, 201,
              {{"dataset_id", id},
               {"n_records", records->size()},
               {"n_no_show", std::count(labels.begin(), labels.end(), 1)},
               {"rejects", rejects}});
  }));

  http.Get("/datasets/:id", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto d = dataset(req.path_params.at("id"));
    const auto labels = d.records->labels();
    send_json(res, 200,
              {{"dataset_id", d.id},
               {"n_records", d.records->size()},
               {"n_no_show", std::count(labels.begin(), labels.end(), 1)}});
  }));

  http.Post("/models", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const Json body = parse_body(req);
    const auto d = dataset(body.at("dataset_id").get<std::string>());
    pipeline::TrainOptions opt;
    opt.kind = pipeline::parse_model_kind(body.at("kind").get<std::string>());
    opt.seed = body.value("seed", std::uint64_t{0});
    opt.folds = body.value("folds", 10);
    opt.repetitions = body.value("repetitions", 10);
    const std::string grid = body.value("grid", std::string("fast"));
    require(grid == "fast" || grid == "full", ErrorKind::Validation, "grid must be fast or full");
    opt.full_grid = grid == "full";
    if (body.contains("service")) {
      auto s = data::parse_service(body.at("service").get<std::string>());
      require(s.has_value(), ErrorKind::Validation, "unknown service");
      opt.service = *s;
    }
    if (body.contains("fractions")) opt.fractions = fractions_of(body.at("fractions"));

    training.acquire();
    std::shared_ptr<const pipeline::ModelBundle> bundle;
    try {
      bundle = std::make_shared<const pipeline::ModelBundle>(pipeline::train_model(*d.records, opt));
    } catch (...) {
      training.release();
      throw;
    }
    training.release();

    std::unique_lock lock(mutex);
    ModelEntry m{make_id("m", next_model++), d.id, now_utc(), "", bundle};
    m.path = (root() / "models" / (m.id + ".json")).string();
    Json file = pipeline::to_json(*bundle);
    file["registry"] = {{"model_id", m.id}, {"dataset_id", m.dataset_id}, {"created_at", m.created_at}};
    atomic_write(m.path, io::dump(file));
    models[m.id] = m;
    lock.unlock();
    Json out = model_summary(m);
    out["cv_report"] = io::to_json(bundle->cv_report);
    send_json(res, 201, out);
  }));

  http.Get("/models", guarded([this](const httplib::Request&, httplib::Response& res) {
    std::shared_lock lock(mutex);
    Json a = Json::array();
    for (const auto& [id, m] : models) a.push_back(model_summary(m));
    send_json(res, 200, {{"models", a}});
  }));

  http.Get("/models/:id/report", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto m = model(req.path_params.at("id"));
    Json out = model_summary(m);
    out["cv_report"] = io::to_json(m.bundle->cv_report);
    out["hyperparameters"] = m.bundle->hyperparameters;
    if (m.bundle->test) {
      out["test"] = {{"split", "held-out 30%"},
                     {"n", m.bundle->test->n},
                     {"auroc", m.bundle->test->auroc},
                     {"policy", io::to_json(m.bundle->test->policy)},
                     {"metrics", io::to_json(m.bundle->test->metrics)}};
    } else {
      out["test"] = nullptr;
    }
    send_json(res, 200, out);
  }));

  http.Post("/models/:id/score", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto m = model(req.path_params.at("id"));
    const Json body = parse_body(req);
    std::shared_ptr<const data::RecordSet> records;
    if (body.contains("dataset_id")) {
      records = dataset(body.at("dataset_id").get<std::string>()).records;
    } else {
      require(body.contains("records"), ErrorKind::Validation, "body needs 'records' or 'dataset_id'");
      records = std::make_shared<const data::RecordSet>(records_from_json(body.at("records")));
    }
    const Vector p = m.bundle->score(*records);
    send_json(res, 200, {{"model_id", m.id}, {"tag", m.bundle->tag()}, {"scores", scores_json(*records, p)}});
  }));

  http.Post("/policy/preview", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const Json body = parse_body(req);
    const auto m = model(body.at("model_id").get<std::string>());
    const auto d = dataset(body.value("dataset_id", m.dataset_id));
    const eval::Fractions f = body.contains("fractions") ? fractions_of(body.at("fractions")) : eval::Fractions{};
    const auto e = pipeline::evaluate(*m.bundle, *d.records, f);
    Json out = io::to_json(e.metrics);
    out["model_id"] = m.id;
    out["dataset_id"] = d.id;
    out["policy"] = io::to_json(e.policy);
    out["auroc"] = e.auroc;
    send_json(res, 200, out);
  }));

  http.Put("/policy", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const Json body = parse_body(req);
    const auto m = model(body.at("model_id").get<std::string>());
    const auto d = dataset(body.value("dataset_id", m.dataset_id));
    const eval::Fractions f = body.contains("fractions") ? fractions_of(body.at("fractions")) : eval::Fractions{};
    const auto e = pipeline::evaluate(*m.bundle, *d.records, f);
    CommittedPolicy c{m.id, d.id, e.policy, now_utc()};
    const Json out = {{"model_id", c.model_id},
                      {"dataset_id", c.dataset_id},
                      {"policy", io::to_json(c.policy)},
                      {"committed_at", c.committed_at},
                      {"metrics", io::to_json(e.metrics)}};
    std::unique_lock lock(mutex);
    atomic_write(root() / "policy.json", io::dump(out));
    policy = c;
    lock.unlock();
    send_json(res, 200, out);
  }));

  http.Get("/policy", guarded([this](const httplib::Request&, httplib::Response& res) {
    std::shared_lock lock(mutex);
    if (!policy) throw NotFound("no policy has been committed");
    send_json(res, 200,
              {{"model_id", policy->model_id},
               {"dataset_id", policy->dataset_id},
               {"policy", io::to_json(policy->policy)},
               {"committed_at", policy->committed_at}});
  }));

  http.Get("/patients/:record_id/explanation", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto m = model(param(req, "model_id"));
    const auto d = dataset(req.has_param("dataset_id") ? param(req, "dataset_id") : m.dataset_id);
    RecordId id = 0;
    try {
      id = std::stoll(req.path_params.at("record_id"));
    } catch (const std::exception&) {
      throw Error(ErrorKind::Validation, "record id must be an integer");
    }
    const auto idx = d.records->find(id);
    if (!idx) throw NotFound("record " + std::to_string(id) + " not in dataset " + d.id);
    Json out = io::to_json(pipeline::explain_record(*m.bundle, (*d.records)[*idx]));
    out["model_id"] = m.id;
    out["dataset_id"] = d.id;
    out["columns"] = m.bundle->schema->column_names();
    send_json(res, 200, out);
  }));

  // Group assignment under the committed policy when it belongs to the model,
  // otherwise under default fractions tuned on the dataset.
  auto cohort = [this](const httplib::Request& req, std::string& dataset_id, std::string& source,
                       ModelEntry& m, std::vector<std::tuple<RecordId, double, eval::Group, std::size_t>>& rows) {
    m = model(param(req, "model_id"));
    std::optional<CommittedPolicy> committed;
    {
      std::shared_lock lock(mutex);
      if (policy && policy->model_id == m.id) committed = policy;
    }
    const auto d = dataset(req.has_param("dataset_id") ? param(req, "dataset_id")
                           : committed                 ? committed->dataset_id
                                                       : m.dataset_id);
    dataset_id = d.id;
    std::optional<eval::Group> only;
    if (req.has_param("group")) {
      const std::string g = param(req, "group");
      require(g == "A" || g == "B" || g == "C", ErrorKind::Validation, "group must be A, B or C");
      only = g == "A" ? eval::Group::A : g == "B" ? eval::Group::B : eval::Group::C;
    }
    const Vector p = m.bundle->score(*d.records);
    std::vector<eval::ScoredRecord> s(d.records->size());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = {(*d.records)[i].record_id, p[static_cast<Eigen::Index>(i)]};
    const eval::CutoffPolicy pol = committed ? committed->policy : eval::tune_cutoffs(s, {});
    source = committed ? "committed" : "default";
    const auto groups = eval::assign_groups(s, pol);
    for (std::size_t i = 0; i < s.size(); ++i) {
      const eval::Group g = groups.at(s[i].record_id);
      if (!only || *only == g) rows.emplace_back(s[i].record_id, s[i].score, g, i);
    }
    return d;
  };

  http.Get("/cohort", guarded([cohort](const httplib::Request& req, httplib::Response& res) {
    std::string dataset_id, source;
    ModelEntry m;
    std::vector<std::tuple<RecordId, double, eval::Group, std::size_t>> rows;
    cohort(req, dataset_id, source, m, rows);
    Json a = Json::array();
    for (const auto& [id, score, g, i] : rows)
      a.push_back({{"record_id", id}, {"probability", score}, {"group", std::string(1, eval::to_char(g))}});
    send_json(res, 200,
              {{"model_id", m.id}, {"dataset_id", dataset_id}, {"policy_source", source}, {"assignments", a}});
  }));

  http.Get("/cohort/heatmap", guarded([cohort](const httplib::Request& req, httplib::Response& res) {
    std::string dataset_id, source;
    ModelEntry m;
    std::vector<std::tuple<RecordId, double, eval::Group, std::size_t>> rows;
    const auto d = cohort(req, dataset_id, source, m, rows);
    std::size_t limit = 20;
    if (req.has_param("limit")) limit = static_cast<std::size_t>(std::stoul(param(req, "limit")));
    std::stable_sort(rows.begin(), rows.end(),
                     [](const auto& a, const auto& b) { return std::get<1>(a) > std::get<1>(b); });
    if (rows.size() > limit) rows.resize(limit);
    require(!rows.empty(), ErrorKind::Validation, "cohort is empty");
    std::vector<explain::RelevanceMap> maps;
    for (const auto& row : rows) maps.push_back(pipeline::explain_record(*m.bundle, (*d.records)[std::get<3>(row)]));
    Json out = io::to_json(explain::relevance_heatmap(maps));
    out["model_id"] = m.id;
    out["dataset_id"] = dataset_id;
    send_json(res, 200, out);
  }));
}

ApiServer::ApiServer(ServerOptions options) : state_(std::make_unique<State>(std::move(options))) {
  state_->load();
  state_->route();
}

ApiServer::~ApiServer() = default;

httplib::Server& ApiServer::http() { return state_->http; }

int ApiServer::bind_any_port(const std::string& host) { return state_->http.bind_to_any_port(host); }

bool ApiServer::listen(const std::string& host, int port) { return state_->http.listen(host, port); }

bool ApiServer::listen_after_bind() { return state_->http.listen_after_bind(); }

void ApiServer::stop() { state_->http.stop(); }

}  // namespace noshow::service
