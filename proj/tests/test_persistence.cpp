#include <doctest.h>

#include <cstring>
#include <filesystem>

#include "helpers.hpp"
#include "noshow/pipeline.hpp"
#include "noshow/serialization.hpp"

using namespace noshow;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "noshow-persistence-test";
  fs::create_directories(dir);
  return dir / name;
}

data::RecordSet synthetic(std::int64_t n, std::uint64_t seed) {
  synth::GeneratorSpec s = synth::default_spec();
  s.n = n;
  s.seed = seed;
  s.true_intercept = -0.9;
  s.true_coefficients["lead_time=>=60"] = 0.9;
  s.true_coefficients["gender=M"] = -0.5;
  return synth::generate(s);
}

// Random rows that respect the one-hot blocks of the schema.
Matrix probes(const data::FeatureSchema& schema, int n, std::uint64_t seed) {
  Rng rng(seed);
  Matrix out = Matrix::Zero(n, schema.width());
  for (int i = 0; i < n; ++i)
    for (std::size_t k = 0; k < schema.variables().size(); ++k) {
      const auto [a, b] = schema.block(k);
      const auto pick = rng.below(static_cast<std::uint64_t>(b - a + 1));
      if (pick < static_cast<std::uint64_t>(b - a)) out(i, a + static_cast<int>(pick)) = 1.0;
    }
  return out;
}

}  // namespace

TEST_CASE("bundles predict bit-identically after save and load") {
  const auto records = synthetic(700, 2);
  for (auto kind : {pipeline::ModelKind::Linear, pipeline::ModelKind::Forest, pipeline::ModelKind::Mlp}) {
    CAPTURE(pipeline::to_string(kind));
    pipeline::TrainOptions opt;
    opt.kind = kind;
    opt.seed = 3;
    opt.folds = 2;
    opt.repetitions = 1;
    const auto bundle = pipeline::train_model(records, opt);
    const auto path = scratch(std::string(pipeline::to_string(kind)) + ".json");
    pipeline::save(bundle, path.string());
    const auto loaded = pipeline::load(path.string());

    const Matrix P = probes(*bundle.schema, 1000, 9);
    const Vector before = bundle.predict(P);
    const Vector after = loaded.predict(P);
    CHECK(before.size() == 1000);
    CHECK(std::memcmp(before.data(), after.data(), sizeof(double) * 1000) == 0);
    CHECK(loaded.score(records) == bundle.score(records));
    CHECK(io::dump(pipeline::to_json(loaded)) == io::dump(pipeline::to_json(bundle)));
    CHECK(*loaded.schema == *bundle.schema);
    CHECK(loaded.tag() == bundle.tag());
  }
}

TEST_CASE("model files are validated on load") {
  const auto path = scratch("broken.json");
  io::write_text_file(path.string(), "{\"schema_version\": 99}");
  CHECK_THROWS_AS(pipeline::load(path.string()), Error);
  io::write_text_file(path.string(), "{\"schema_version\": 1, \"kind\": \"mlp\"}");
  try {
    pipeline::load(path.string());
    FAIL("expected schema error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Schema);
  }
  io::write_text_file(path.string(), "not json");
  CHECK_THROWS_AS(pipeline::load(path.string()), Error);
  CHECK_THROWS_AS(pipeline::load((fs::temp_directory_path() / "does-not-exist.json").string()), Error);
}

TEST_CASE("schema and spec round trips") {
  const auto r = testkit::random_records(200, 5);
  data::EncodeOptions opt;
  opt.drop_reference = true;
  opt.interactions = {{data::Variable::Gender, data::Variable::Day}};
  const data::FeatureSchema s = data::fit_schema(r, data::fit_bins(r), opt);
  const auto back = io::schema_from_json(io::to_json(s));
  CHECK(back == s);
  CHECK(back.column_names() == s.column_names());

  const synth::GeneratorSpec spec = synth::table8_preset();
  CHECK(io::generator_spec_from_json(io::to_json(spec)) == spec);

  const data::BinSpec b(data::Variable::LeadTime, {3, 17, 40});
  CHECK(io::bin_spec_from_json(io::to_json(b)) == b);

  eval::CutoffPolicy p{{0.2, 0.5, 0.3}, {0.25, INT64_MIN}, {0.75, 17}};
  const auto q = io::policy_from_json(io::to_json(p));
  CHECK(q.t1.score == 0.25);
  CHECK(q.t1.tie_id == INT64_MIN);
  CHECK(q.t2.tie_id == 17);
  CHECK(q.fractions.b == 0.5);
}

TEST_CASE("component models round trip exactly") {
  const auto r = testkit::random_records(300, 6);
  const auto X = data::encode(r, data::fit_bins(r), false);
  const auto forest = forest::fit_forest(X, {}, {4, 3, 0.02, 1e-5}, 5);
  const auto f2 = io::forest_from_json(io::to_json(forest));
  CHECK(f2.trees == forest.trees);
  CHECK(f2.params == forest.params);

  const auto mlp = neural::init_mlp(X.width(), 5, 3);
  CHECK(io::mlp_from_json(io::to_json(mlp)) == mlp);

  linear::FittedLinearModel lm;
  lm.intercept = -0.123456789012345678;
  lm.coefficients = Vector::LinSpaced(X.width(), -1.0 / 3.0, 2.0 / 7.0);
  lm.penalty_lambda = 0.19;
  lm.schema = X.schema;
  const auto lm2 = io::linear_from_json(io::to_json(lm));
  CHECK(lm2.intercept == lm.intercept);
  CHECK(lm2.coefficients == lm.coefficients);
}
