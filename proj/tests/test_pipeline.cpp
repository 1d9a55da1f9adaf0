#include <doctest.h>

#include <fstream>
#include <map>

#include "care/errors.hpp"
#include "care/pipeline/artifacts.hpp"
#include "care/pipeline/commands.hpp"
#include "care/pipeline/config.hpp"
#include "care/synthetic.hpp"
#include "fixtures.hpp"

using namespace care;
using namespace care::pipeline;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json tiny_train() {
  return {{"vocab_size", 512}, {"hidden_width", 16},  {"layers", 1},
          {"heads", 2},        {"ffn_width", 32},     {"adapter_rank", 2},
          {"adapter_scale", 4.0}, {"fusion_heads", 2}, {"epochs", 1},
          {"batch_size", 4},   {"learning_rate", 3e-3}, {"max_sequence_length", 256}};
}

// Synthetic corpus on disk plus a config file pointing at it.
struct Project {
  fixture::TempDir dir{"care-pipeline"};
  fs::path config_path;

  explicit Project(json extra = json::object()) {
    write_synthetic_corpus(make_keyword_corpus(5, 4), dir / "data");
    json cfg = {{"corpus", {{"utterances", "data/utterances.jsonl"},
                            {"annotations", "data/annotations.jsonl"}}},
                {"teacher", {{"base_delay_ms", 0}}},
                {"train", tiny_train()},
                {"output_dir", "out"}};
    cfg.merge_patch(extra);
    config_path = dir / "care.json";
    std::ofstream(config_path) << cfg.dump(2);
  }

  PipelineConfig config(const std::vector<std::string>& overrides = {}) const {
    return load_pipeline_config(config_path, overrides);
  }
  fs::path out() const { return dir / "out"; }
};

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), root).string();
    if (rel.find("cache") != std::string::npos) continue;
    files[rel] = read_text(e.path());
  }
  return files;
}

void run_all(const PipelineConfig& cfg) {
  run_ingest(cfg);
  run_split(cfg);
  run_validate(cfg);
  run_build_index(cfg);
  run_distill(cfg);
  run_train(cfg);
  run_predict(cfg, "test");
  run_baseline(cfg, "test");
  CommandOptions report;
  report.predictions = {Workspace(cfg).predictions("test"),
                        Workspace(cfg).baseline_predictions("zero_shot", "test")};
  run_report(cfg, report);
}

}  // namespace

TEST_CASE("config parsing reports field paths") {
  auto expect_error = [](const json& doc, const std::string& path) {
    try {
      pipeline_config_from_json(doc);
      FAIL("expected ConfigError for " << path);
    } catch (const ConfigError& e) {
      INFO(e.what());
      CHECK(std::string(e.what()).find(path) != std::string::npos);
    }
  };
  expect_error({{"train", {{"epochs", "ten"}}}}, "train.epochs");
  expect_error({{"train", {{"epoch", 3}}}}, "train.epoch");
  expect_error({{"teacher", {{"temperature", "hot"}}}}, "teacher.temperature");
  expect_error({{"distill", {{"polarity", "sideways"}}}}, "distill.polarity");
  expect_error({{"context", {{"care_k", -1}}}}, "context.care_k");
  expect_error({{"unknown_section", 1}}, "unknown_section");
  expect_error({{"split", {{"ratios", {0.5, 0.5}}}}}, "split.ratios");

  const auto c = pipeline_config_from_json(
      {{"corpus", {{"utterances", "u.jsonl"}}}, {"context", {{"care_k", 2}}}}, "/base");
  CHECK(c.utterances == fs::path("/base/u.jsonl"));
  CHECK(c.train.k == 2);
  CHECK_FALSE(c.annotations.has_value());
}

TEST_CASE("overrides win over the file") {
  Project p;
  const auto base = p.config();
  CHECK(base.train.epochs == 1);
  const auto c = p.config({"train.epochs=4", "teacher.id=mock:fixed:hi", "context.care_k=2"});
  CHECK(c.train.epochs == 4);
  CHECK(c.teacher == "mock:fixed:hi");
  CHECK(c.care_k == 2);
  CHECK(c.fingerprint() != base.fingerprint());
  CHECK_THROWS_AS(p.config({"train.epochs"}), ConfigError);

  json doc = json::object();
  apply_override(doc, "a.b.c=[1,2]");
  CHECK(doc["a"]["b"]["c"] == json({1, 2}));
  apply_override(doc, "a.name=plain text");
  CHECK(doc["a"]["name"] == "plain text");
}

TEST_CASE("the output directory does not affect the fingerprint") {
  Project p;
  CHECK(p.config({"output_dir=elsewhere"}).fingerprint() == p.config().fingerprint());
}

TEST_CASE("validate on the minimal two-turn fixture") {
  fixture::TempDir dir;
  std::ofstream(dir / "u.jsonl")
      << R"({"session_id":"s","turn_index":0,"speaker":"patient","text":"hi","utterance_id":"a"})"
      << "\n"
      << R"({"session_id":"s","turn_index":1,"speaker":"therapist","text":"hello","utterance_id":"b"})"
      << "\n";
  const auto cfg = pipeline_config_from_json(
      {{"corpus", {{"utterances", "u.jsonl"}}}, {"output_dir", "out"}}, dir.path());
  const auto report = run_validate(cfg);
  CHECK(report["therapist_utterances"] == 1);
  CHECK(fs::exists(dir / "out/validation/report.json"));
  CHECK(fs::exists(dir / "out/validation/label_distribution.csv"));
}

TEST_CASE("missing prerequisites name the producing command") {
  Project p;
  const auto cfg = p.config();
  try {
    run_build_index(cfg);
    FAIL("expected MissingArtifactError");
  } catch (const MissingArtifactError& e) {
    CHECK(std::string(e.what()).find("care ingest") != std::string::npos);
  }
  run_ingest(cfg);
  try {
    run_train(cfg);
    FAIL("expected MissingArtifactError");
  } catch (const MissingArtifactError& e) {
    CHECK(std::string(e.what()).find("care split") != std::string::npos);
  }
  run_split(cfg);
  CHECK_THROWS_AS(run_distill(cfg), MissingArtifactError);
  CHECK_THROWS_AS(run_predict(cfg, "test"), MissingArtifactError);

  auto bad = cfg;
  bad.utterances = p.dir / "nope.jsonl";
  CHECK_THROWS_AS(run_ingest(bad), ConfigError);
}

TEST_CASE("report on predictions equal to gold") {
  Project p;
  const auto cfg = p.config();
  run_ingest(cfg);
  const auto corpus = load_ingested_corpus(Workspace(cfg));
  std::vector<PredictionRecord> records;
  for (const auto& [id, labels] : corpus.annotations()) {
    PredictionRecord r;
    r.utterance_id = id;
    r.scores = degenerate_scores(labels);
    r.corpus_fingerprint = corpus.fingerprint();
    records.push_back(r);
  }
  {
    std::ofstream out(p.dir / "gold.jsonl");
    write_predictions(records, out);
  }
  CommandOptions opts;
  opts.predictions = {p.dir / "gold.jsonl"};
  run_report(cfg, opts);
  const auto csv = read_text(p.out() / "report/gold/metrics.csv");
  CHECK(csv.find("\npooled,100.00,100.00,100.00,100.00,100.00,100.00,100.00,") !=
        std::string::npos);
  CHECK(fs::exists(p.out() / "report/gold/confusion_active_listening.csv"));
  CHECK(fs::exists(p.out() / "report/gold/confusion_active_listening.svg"));

  SUBCASE("mismatched corpus fingerprints are refused") {
    records[0].corpus_fingerprint = "0000000000000000";
    {
      std::ofstream out(p.dir / "other.jsonl");
      write_predictions(records, out);
    }
    opts.predictions = {p.dir / "other.jsonl"};
    CHECK_THROWS_AS(run_report(cfg, opts), FingerprintMismatchError);
  }
}

TEST_CASE("full offline pipeline emits every artifact and is idempotent") {
  Project p;
  const auto cfg = p.config();
  run_all(cfg);

  const Workspace ws(cfg);
  for (const auto& path :
       {ws.corpus_utterances(), ws.corpus_annotations(), ws.ingest_summary(), ws.split(),
        ws.validation_json(), ws.validation_csv(), ws.index(), ws.index_summary(),
        ws.rationales(), ws.coverage(), ws.model_dir() / "fingerprint",
        ws.predictions("test"), ws.baseline_predictions("zero_shot", "test"),
        ws.report_dir("care_test") / "metrics.json", ws.manifest()}) {
    INFO(path.string());
    CHECK(fs::exists(path));
  }

  const auto manifest = json::parse(read_text(ws.manifest()));
  CHECK(manifest["config_fingerprint"] == cfg.fingerprint());
  for (const auto& [rel, entry] : manifest["artifacts"].items()) {
    INFO(rel);
    CHECK(entry["config_fingerprint"] == cfg.fingerprint());
    CHECK(entry["sha256"].get<std::string>().size() == 64);
  }
  CHECK(manifest["artifacts"].contains("model/adapter.bin"));
  CHECK(manifest["artifacts"]["index/pools.idx"]["command"] == "build-index");

  // every prediction carries the fingerprints
  std::ifstream preds(ws.predictions("test"));
  const auto records = read_predictions(preds);
  REQUIRE_FALSE(records.empty());
  for (const auto& r : records) {
    CHECK(r.config_fingerprint == cfg.fingerprint());
    CHECK_FALSE(r.corpus_fingerprint.empty());
    CHECK_FALSE(r.checkpoint.empty());
  }

  const auto first = snapshot(p.out());
  run_all(cfg);
  const auto second = snapshot(p.out());
  CHECK(first.size() == second.size());
  for (const auto& [rel, bytes] : first) {
    INFO(rel);
    REQUIRE(second.contains(rel));
    CHECK(second.at(rel) == bytes);
  }
}

TEST_CASE("ablation sweep over k") {
  Project p(json{{"sweep", {{"k", {1, 2}}, {"polarity", {"both"}}}}});
  const auto cfg = p.config();
  run_ingest(cfg);
  run_split(cfg);
  run_build_index(cfg);
  CommandOptions opts;
  opts.sweep = true;
  const auto summary = run_command("train", cfg, opts);
  REQUIRE(summary["cells"].size() == 2);
  CHECK(fs::exists(p.out() / "sweep/summary.csv"));
  const auto csv = read_text(p.out() / "sweep/summary.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') >= 3);
  CHECK_NOTHROW(run_command("predict", cfg, opts));
  CHECK_THROWS_AS(run_command("frobnicate", cfg, opts), ConfigError);
}
