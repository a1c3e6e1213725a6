#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "noshow/pipeline.hpp"
#include "noshow/server.hpp"
#include "noshow/synth.hpp"

namespace fs = std::filesystem;
using namespace noshow;
using io::Json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Args {
  std::string in, out, model = "linear", model_file, service, fractions = "0.3,0.4,0.3", grid = "fast";
  std::string scores, preset = "table8", data_dir;
  std::uint64_t seed = 0;
  std::int64_t n = 0, record = -1;
  int folds = 10, reps = 10, port = 8080, limit = 20;
};

std::string fnv1a(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

Json file_entries(const std::vector<std::string>& paths) {
  Json a = Json::array();
  for (const auto& p : paths)
    if (!p.empty()) a.push_back({{"path", p}, {"fnv1a", fnv1a(p)}});
  return a;
}

void write_manifest(const std::string& command, const std::vector<std::string>& argv, const Args& a,
                    const std::vector<std::string>& inputs, const std::vector<std::string>& outputs) {
  if (outputs.empty() || outputs.front().empty()) return;
  const Json m = {{"command", command},
                  {"argv", argv},
                  {"seed", a.seed},
                  {"versions", {{"noshow", kVersion}, {"schema_version", data::kSchemaVersion}}},
                  {"inputs", file_entries(inputs)},
                  {"outputs", file_entries(outputs)}};
  io::write_json_file(outputs.front() + ".manifest.json", m);
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty())
    std::cout << text;
  else
    io::write_text_file(out, text);
}

data::RecordSet read_records(const std::string& path) {
  require(!path.empty(), ErrorKind::Validation, "--in is required");
  auto r = data::ingest_csv(path);
  for (const auto& rej : r.rejects) std::cerr << "skipped line " << rej.line << ": " << rej.reason << '\n';
  require(!r.records.empty(), ErrorKind::Validation, path + " holds no valid records");
  return std::move(r.records);
}

pipeline::ModelBundle read_model(const std::string& path) {
  require(!path.empty(), ErrorKind::Validation, "--model-file is required");
  return pipeline::load(path);
}

std::vector<eval::ScoredRecord> read_scores(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::Validation, path + ": empty score file");
  std::vector<eval::ScoredRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    try {
      require(comma != std::string::npos, ErrorKind::Validation, "");
      out.push_back({std::stoll(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
    } catch (const std::exception&) {
      throw Error(ErrorKind::Validation, path + " line " + std::to_string(line_no) + ": expected record_id,score");
    }
  }
  require(!out.empty(), ErrorKind::Validation, path + ": no scores");
  return out;
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Validation:
    case ErrorKind::Schema:
    case ErrorKind::Encoding:
    case ErrorKind::Dimension:
    case ErrorKind::Policy:
    case ErrorKind::Metric: return 1;
    default: return 2;
  }
}

int fail(int code, const std::string& kind, const std::string& message) {
  std::cerr << Json{{"code", kind}, {"message", message}}.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"No-show risk scoring: synthetic data, model training, evaluation and serving"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Args a;
  const std::vector<std::string> args(argv + 1, argv + argc);

  auto* gen = app.add_subcommand("generate", "Write a synthetic appointment CSV");
  gen->add_option("--in", a.in, "Generator spec JSON (defaults to the built-in preset)");
  gen->add_option("--preset", a.preset, "Built-in spec when --in is absent")->check(CLI::IsMember({"table8", "uniform"}));
  gen->add_option("--n", a.n, "Number of records (overrides the spec)");
  gen->add_option("--seed", a.seed, "Random seed");
  gen->add_option("--out", a.out, "Output CSV")->required();

  auto* train = app.add_subcommand("train", "Fit a model and write it as JSON");
  train->add_option("--in", a.in, "Appointment CSV")->required();
  train->add_option("--model", a.model, "linear, forest or mlp");
  train->add_option("--service", a.service, "Restrict to one service (OH, GD, YAP, SP)");
  train->add_option("--seed", a.seed, "Random seed");
  train->add_option("--folds", a.folds, "CV folds");
  train->add_option("--reps", a.reps, "CV repetitions");
  train->add_option("--grid", a.grid, "Hyperparameter grid")->check(CLI::IsMember({"fast", "full"}));
  train->add_option("--fractions", a.fractions, "Group fractions a,b,c for the test metrics");
  train->add_option("--out", a.out, "Model file");

  auto* evaluate = app.add_subcommand("evaluate", "AUROC, coverage and risk of a model on a dataset");
  evaluate->add_option("--model-file", a.model_file, "Model JSON")->required();
  evaluate->add_option("--in", a.in, "Appointment CSV")->required();
  evaluate->add_option("--fractions", a.fractions, "Group fractions a,b,c");
  evaluate->add_option("--out", a.out, "Report JSON (stdout if absent)");

  auto* score = app.add_subcommand("score", "No-show probabilities per record");
  score->add_option("--model-file", a.model_file, "Model JSON")->required();
  score->add_option("--in", a.in, "Appointment CSV")->required();
  score->add_option("--out", a.out, "Score CSV (stdout if absent)");

  auto* explain = app.add_subcommand("explain", "Relevance heatmap of the highest-risk records (mlp models)");
  explain->add_option("--model-file", a.model_file, "Model JSON")->required();
  explain->add_option("--in", a.in, "Appointment CSV")->required();
  explain->add_option("--record", a.record, "Explain one record as JSON");
  explain->add_option("--limit", a.limit, "Number of heatmap columns");
  explain->add_option("--out", a.out, "CSV, or JSON when the name ends in .json");

  auto* tune = app.add_subcommand("tune", "Cut-off thresholds realizing the group fractions");
  tune->add_option("--scores,--in", a.scores, "CSV of record_id,score")->required();
  tune->add_option("--fractions", a.fractions, "Group fractions a,b,c");
  tune->add_option("--out", a.out, "Policy JSON (stdout if absent)");

  auto* serve = app.add_subcommand("serve", "HTTP JSON API");
  serve->add_option("--port", a.port, "Port");
  serve->add_option("--data-dir", a.data_dir, "Registry root (default $NOSHOW_DATA_DIR)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(1, "validation_error", e.what());
  }

  try {
    if (*gen) {
      synth::GeneratorSpec spec = a.in.empty() ? (a.preset == "table8" ? synth::table8_preset() : synth::default_spec())
                                               : io::generator_spec_from_json(io::read_json_file(a.in));
      if (a.n > 0) spec.n = a.n;
      if (gen->count("--seed")) spec.seed = a.seed;
      a.seed = spec.seed;
      data::write_csv(a.out, synth::generate(spec));
      write_manifest("generate", args, a, {a.in}, {a.out});
    } else if (*train) {
      pipeline::TrainOptions opt;
      opt.kind = pipeline::parse_model_kind(a.model);
      opt.seed = a.seed;
      opt.folds = a.folds;
      opt.repetitions = a.reps;
      opt.full_grid = a.grid == "full";
      opt.fractions = eval::parse_fractions(a.fractions);
      if (!a.service.empty()) {
        auto s = data::parse_service(a.service);
        require(s.has_value(), ErrorKind::Validation, "unknown service '" + a.service + "'");
        opt.service = *s;
      }
      const auto bundle = pipeline::train_model(read_records(a.in), opt);
      emit(a.out, io::dump(pipeline::to_json(bundle)));
      write_manifest("train", args, a, {a.in}, {a.out});
    } else if (*evaluate) {
      const auto bundle = read_model(a.model_file);
      const auto e = pipeline::evaluate(bundle, read_records(a.in), eval::parse_fractions(a.fractions));
      Json report = pipeline::to_json(e);
      report["model_tag"] = bundle.tag();
      emit(a.out, io::dump(report));
      write_manifest("evaluate", args, a, {a.model_file, a.in}, {a.out});
    } else if (*score) {
      const auto bundle = read_model(a.model_file);
      const auto records = read_records(a.in);
      const Vector p = bundle.score(records);
      std::ostringstream out;
      out.precision(17);
      out << "record_id,probability\n";
      for (std::size_t i = 0; i < records.size(); ++i) out << records[i].record_id << ',' << p[static_cast<Eigen::Index>(i)] << '\n';
      emit(a.out, out.str());
      write_manifest("score", args, a, {a.model_file, a.in}, {a.out});
    } else if (*explain) {
      const auto bundle = read_model(a.model_file);
      const auto records = read_records(a.in);
      const bool as_json = a.out.size() >= 5 && a.out.substr(a.out.size() - 5) == ".json";
      if (a.record >= 0) {
        const auto idx = records.find(a.record);
        require(idx.has_value(), ErrorKind::Validation, "record " + std::to_string(a.record) + " not in " + a.in);
        emit(a.out, io::dump(io::to_json(pipeline::explain_record(bundle, records[*idx]))));
      } else {
        require(a.limit >= 1, ErrorKind::Validation, "--limit must be positive");
        const Vector p = bundle.score(records);
        std::vector<std::size_t> order(records.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
          return p[static_cast<Eigen::Index>(x)] > p[static_cast<Eigen::Index>(y)];
        });
        order.resize(std::min(order.size(), static_cast<std::size_t>(a.limit)));
        std::vector<explain::RelevanceMap> maps;
        for (std::size_t i : order) maps.push_back(pipeline::explain_record(bundle, records[i]));
        const auto table = explain::relevance_heatmap(maps);
        if (as_json) {
          emit(a.out, io::dump(io::to_json(table)));
        } else {
          std::ostringstream out;
          table.write_csv(out);
          emit(a.out, out.str());
        }
      }
      write_manifest("explain", args, a, {a.model_file, a.in}, {a.out});
    } else if (*tune) {
      const auto s = read_scores(a.scores);
      const auto policy = eval::tune_cutoffs(s, eval::parse_fractions(a.fractions));
      const auto groups = eval::assign_groups(s, policy);
      std::array<std::int64_t, 3> sizes{};
      for (const auto& [id, g] : groups) ++sizes[static_cast<std::size_t>(g)];
      Json out = io::to_json(policy);
      out["group_sizes"] = {{"A", sizes[0]}, {"B", sizes[1]}, {"C", sizes[2]}};
      emit(a.out, io::dump(out));
      write_manifest("tune", args, a, {a.scores}, {a.out});
    } else if (*serve) {
      service::ServerOptions opt;
      if (!a.data_dir.empty())
        opt.data_dir = a.data_dir;
      else if (const char* env = std::getenv("NOSHOW_DATA_DIR"))
        opt.data_dir = env;
      service::ApiServer server(opt);
      std::cerr << "serving on port " << a.port << ", registry " << opt.data_dir << '\n';
      if (!server.listen("0.0.0.0", a.port)) return fail(2, "io_error", "cannot listen on port " + std::to_string(a.port));
    }
  } catch (const Error& e) {
    return fail(exit_code(e.kind()), to_string(e.kind()), e.what());
  } catch (const std::exception& e) {
    return fail(2, "internal_error", e.what());
  }
  return 0;
}
