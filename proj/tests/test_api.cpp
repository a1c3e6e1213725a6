#include <doctest.h>

#include <filesystem>
#include <sstream>
#include <thread>

#include "noshow/detail/httplib.hpp"

#include "helpers.hpp"
#include "noshow/pipeline.hpp"
#include "noshow/server.hpp"

using namespace noshow;
using io::Json;
namespace fs = std::filesystem;

namespace {

class Running {
 public:
  explicit Running(const fs::path& dir) : server_(service::ServerOptions{dir.string(), 1}) {
    port_ = server_.bind_any_port();
    REQUIRE(port_ > 0);
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    client_->set_read_timeout(600, 0);
    while (!server_.http().is_running()) std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  ~Running() {
    server_.stop();
    thread_.join();
  }
  httplib::Client& client() { return *client_; }

 private:
  service::ApiServer server_;
  int port_ = 0;
  std::thread thread_;
  std::unique_ptr<httplib::Client> client_;
};

struct Reply {
  int status = 0;
  Json body;
};

Reply wrap(const httplib::Result& r) {
  REQUIRE(r);
  return {r->status, r->body.empty() ? Json() : Json::parse(r->body)};
}

Reply post(httplib::Client& c, const std::string& path, const Json& body) {
  return wrap(c.Post(path, body.dump(), "application/json"));
}
Reply put(httplib::Client& c, const std::string& path, const Json& body) {
  return wrap(c.Put(path, body.dump(), "application/json"));
}
Reply get(httplib::Client& c, const std::string& path) { return wrap(c.Get(path)); }

data::RecordSet synthetic(std::int64_t n) {
  synth::GeneratorSpec s = synth::default_spec();
  s.n = n;
  s.seed = 21;
  s.true_intercept = -0.8;
  s.true_coefficients["lead_time=>=60"] = 1.0;
  s.true_coefficients["day=SAT"] = 0.6;
  return synth::generate(s);
}

std::string csv_of(const data::RecordSet& r) {
  std::ostringstream out;
  data::write_csv(out, r);
  return out.str();
}

Json record_json(const data::AppointmentRecord& r) {
  return {{"record_id", r.record_id},
          {"gender", data::to_string(r.gender)},
          {"age_years", r.age_years},
          {"zone_id", r.zone_id},
          {"zone_income", data::to_string(r.zone_income)},
          {"service", data::to_string(r.service)},
          {"facility_id", r.facility_id},
          {"lead_time_days", r.lead_time_days},
          {"month", r.month},
          {"day_of_week", data::to_string(r.day_of_week)}};
}

}  // namespace

TEST_CASE("api round trip against the library") {
  const fs::path dir = fs::temp_directory_path() / "noshow-api-test";
  fs::remove_all(dir);
  const auto records = synthetic(600);
  std::string linear_id, mlp_id, dataset_id;

  {
    Running server(dir);
    auto& c = server.client();

    const std::string body = csv_of(records) + "999999,X,1,Z01,low,OH,F01,1,1,MON,show\n";
    const Reply up = wrap(c.Post("/datasets", body, "text/csv"));
    REQUIRE(up.status == 201);
    dataset_id = up.body.at("dataset_id");
    CHECK(dataset_id == "ds-0001");
    CHECK(up.body.at("n_records") == 600);
    CHECK(up.body.at("rejects").size() == 1);
    CHECK(up.body.at("rejects")[0].at("line") == 602);

    httplib::MultipartFormDataItems items{{"file", csv_of(records), "data.csv", "text/csv"}};
    const Reply multipart = wrap(c.Post("/datasets", items));
    CHECK(multipart.status == 201);
    CHECK(multipart.body.at("dataset_id") == "ds-0002");

    CHECK(get(c, "/datasets/" + dataset_id).body.at("n_no_show") == up.body.at("n_no_show"));
    CHECK(get(c, "/datasets/ds-9999").status == 404);

    const Reply lr = post(c, "/models", {{"kind", "linear"}, {"dataset_id", dataset_id}, {"seed", 4}, {"folds", 2}, {"repetitions", 1}});
    REQUIRE(lr.status == 201);
    linear_id = lr.body.at("model_id");
    CHECK(lr.body.at("tag") == "ALL/LR");
    CHECK(lr.body.at("cv_report").at("fold_scores").size() == 2);

    const Reply nn = post(c, "/models", {{"kind", "nn"}, {"dataset_id", dataset_id}, {"seed", 4}, {"folds", 2}, {"repetitions", 1}});
    REQUIRE(nn.status == 201);
    mlp_id = nn.body.at("model_id");
    CHECK(get(c, "/models").body.at("models").size() == 2);

    // the stored artifact and a fresh library run agree with the API bit for bit
    pipeline::TrainOptions opt;
    opt.seed = 4;
    opt.folds = 2;
    opt.repetitions = 1;
    const auto bundle = pipeline::train_model(records, opt);
    const Reply report = get(c, "/models/" + linear_id + "/report");
    REQUIRE(report.status == 200);
    CHECK(report.body.at("cv_report") == io::to_json(bundle.cv_report));
    CHECK(report.body.at("test").at("auroc").get<double>() == bundle.test->auroc);

    const Reply scores = post(c, "/models/" + linear_id + "/score", {{"dataset_id", dataset_id}});
    REQUIRE(scores.status == 200);
    const Vector p = bundle.score(records);
    REQUIRE(scores.body.at("scores").size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
      CHECK(scores.body["scores"][i].at("record_id") == records[i].record_id);
      CHECK(scores.body["scores"][i].at("probability").get<double>() == p[static_cast<Eigen::Index>(i)]);
    }

    Json some = Json::array();
    for (std::size_t i = 0; i < 5; ++i) some.push_back(record_json(records[i]));
    const Reply inline_scores = post(c, "/models/" + linear_id + "/score", {{"records", some}});
    REQUIRE(inline_scores.status == 200);
    for (std::size_t i = 0; i < 5; ++i)
      CHECK(inline_scores.body["scores"][i].at("probability").get<double>() == p[static_cast<Eigen::Index>(i)]);

    const Reply preview = post(c, "/policy/preview", {{"model_id", linear_id}, {"fractions", "0.2,0.5,0.3"}});
    REQUIRE(preview.status == 200);
    const auto e = pipeline::evaluate(bundle, records, {0.2, 0.5, 0.3});
    CHECK(preview.body.at("coverage").get<double>() == e.metrics.coverage);
    CHECK(preview.body.at("risk").get<double>() == e.metrics.risk);
    CHECK(preview.body.at("group_sizes").at("A") == 120);
    CHECK(preview.body.at("group_sizes").at("C") == 180);

    CHECK(get(c, "/policy").status == 404);
    const Reply committed = put(c, "/policy", {{"model_id", mlp_id}, {"fractions", {0.3, 0.4, 0.3}}});
    REQUIRE(committed.status == 200);
    CHECK(get(c, "/policy").body.at("model_id") == mlp_id);

    const Reply cohort = get(c, "/cohort?model_id=" + mlp_id + "&group=C");
    REQUIRE(cohort.status == 200);
    CHECK(cohort.body.at("policy_source") == "committed");
    CHECK(cohort.body.at("assignments").size() == 180);
    const Reply other = get(c, "/cohort?model_id=" + linear_id);
    CHECK(other.body.at("policy_source") == "default");
    CHECK(other.body.at("assignments").size() == 600);

    const Reply expl = get(c, "/patients/" + std::to_string(records[3].record_id) + "/explanation?model_id=" + mlp_id);
    REQUIRE(expl.status == 200);
    const auto nn_bundle = pipeline::load((dir / "models" / (mlp_id + ".json")).string());
    const auto map = pipeline::explain_record(nn_bundle, records[3]);
    CHECK(expl.body.at("output_relevance").get<double>() == map.output_relevance);
    CHECK(expl.body.at("per_column").size() == static_cast<std::size_t>(map.per_column.size()));

    const Reply heat = get(c, "/cohort/heatmap?model_id=" + mlp_id + "&group=C&limit=10");
    REQUIRE(heat.status == 200);
    const auto probs = heat.body.at("probabilities").get<std::vector<double>>();
    CHECK(probs.size() == 10);
    CHECK(std::is_sorted(probs.rbegin(), probs.rend()));

    // error mapping
    CHECK(get(c, "/models/m-0404/report").status == 404);
    CHECK(get(c, "/patients/1/explanation?model_id=" + linear_id).status == 400);
    CHECK(post(c, "/policy/preview", {{"model_id", linear_id}, {"fractions", "0.5,0.5,0.5"}}).status == 400);
    CHECK(wrap(c.Post("/models", "{not json", "application/json")).status == 400);
    CHECK(post(c, "/models", {{"kind", "svm"}, {"dataset_id", dataset_id}}).status == 400);
    Json odd = record_json(records[0]);
    odd["facility_id"] = "F99";
    const Reply enc = post(c, "/models/" + linear_id + "/score", {{"records", {odd}}});
    CHECK(enc.status == 409);
    CHECK(enc.body.at("code") == "encoding_error");
    CHECK(enc.body.contains("message"));
    CHECK(enc.body.contains("detail"));
  }

  // registry survives a restart
  Running again(dir);
  auto& c = again.client();
  CHECK(get(c, "/models").body.at("models").size() == 2);
  CHECK(get(c, "/policy").body.at("model_id") == mlp_id);
  const Reply up = wrap(c.Post("/datasets", csv_of(records), "text/csv"));
  CHECK(up.body.at("dataset_id") == "ds-0003");
  fs::remove_all(dir);
}
