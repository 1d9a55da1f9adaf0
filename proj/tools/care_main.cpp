#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "care/errors.hpp"
#include "care/pipeline/commands.hpp"
#include "care/pipeline/config.hpp"

namespace fs = std::filesystem;
using care::pipeline::CommandOptions;

namespace {

struct Flags {
  std::string config;
  std::vector<std::string> set;
  std::string output;
  std::string utterances;
  std::string annotations;
  std::string split_file;
  std::string provider;
  std::string teacher;
  std::string polarity;
  std::string mode;
  int k = -1;
  int epochs = -1;
  long long seed = -1;
  std::string log_level = "warn";
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("-c,--config", f.config, "pipeline config file (JSON)");
  cmd->add_option("--set", f.set, "override a config field, e.g. --set train.epochs=5")
      ->take_all();
  cmd->add_option("-o,--output", f.output, "output directory");
  cmd->add_option("--log-level", f.log_level, "trace|debug|info|warn|error|off");
}

// Dedicated flags become overrides applied after --set, so they win.
std::vector<std::string> overrides(const Flags& f) {
  std::vector<std::string> out = f.set;
  auto path = [](const std::string& p) {
    return nlohmann::json(fs::absolute(p).string()).dump();
  };
  auto str = [](const std::string& s) { return nlohmann::json(s).dump(); };
  if (!f.output.empty()) out.push_back("output_dir=" + path(f.output));
  if (!f.utterances.empty()) out.push_back("corpus.utterances=" + path(f.utterances));
  if (!f.annotations.empty()) out.push_back("corpus.annotations=" + path(f.annotations));
  if (!f.split_file.empty()) out.push_back("split.file=" + path(f.split_file));
  if (!f.provider.empty()) out.push_back("embedding.provider=" + str(f.provider));
  if (!f.teacher.empty()) out.push_back("teacher.id=" + str(f.teacher));
  if (!f.polarity.empty()) out.push_back("distill.polarity=" + str(f.polarity));
  if (!f.mode.empty()) out.push_back("baseline.mode=" + str(f.mode));
  if (f.k >= 0) out.push_back("context.care_k=" + std::to_string(f.k));
  if (f.epochs >= 0) out.push_back("train.epochs=" + std::to_string(f.epochs));
  if (f.seed >= 0) out.push_back("train.seed=" + std::to_string(f.seed));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"care: context-aware, rationale-enhanced scoring of therapist utterances"};
  app.require_subcommand(1);
  Flags flags;
  CommandOptions options;
  std::vector<std::string> predictions;
  std::string reference;

  auto* ingest = app.add_subcommand("ingest", "read and canonicalize the corpus");
  auto* split = app.add_subcommand("split", "assign sessions to train/validation/test");
  auto* validate = app.add_subcommand("validate", "corpus statistics and sanity warnings");
  auto* index = app.add_subcommand("build-index", "embed label-exclusive exemplar pools");
  auto* distill = app.add_subcommand("distill", "generate per-dimension rationales");
  auto* train = app.add_subcommand("train", "fine-tune adapters, fusion and heads");
  auto* predict = app.add_subcommand("predict", "score a split with the trained model");
  auto* baseline = app.add_subcommand("baseline", "zero-/few-shot prompt evaluation");
  auto* report = app.add_subcommand("report", "metrics bundle for prediction files");

  for (auto* cmd : {ingest, split, validate, index, distill, train, predict, baseline, report}) {
    add_common(cmd, flags);
  }
  for (auto* cmd : {ingest, validate}) {
    cmd->add_option("--utterances", flags.utterances, "utterance JSONL");
    cmd->add_option("--annotations", flags.annotations, "annotation JSONL");
  }
  split->add_option("--split-file", flags.split_file, "official split file");
  index->add_option("--provider", flags.provider, "embedding provider id");
  distill->add_option("--provider", flags.provider, "embedding provider id");
  distill->add_option("--teacher", flags.teacher, "teacher id");
  distill->add_option("--polarity", flags.polarity, "both|positive|negative");
  for (auto* cmd : {train, predict}) {
    cmd->add_option("--k", flags.k, "context window size");
    cmd->add_flag("--sweep", options.sweep, "expand the k x polarity x teacher grid");
  }
  train->add_option("--epochs", flags.epochs, "training epochs");
  train->add_option("--seed", flags.seed, "training seed");
  for (auto* cmd : {predict, baseline}) {
    cmd->add_option("--split", options.split, "train|validation|test");
  }
  baseline->add_option("--mode", flags.mode, "zero_shot|few_shot");
  report->add_option("-p,--predictions", predictions, "PredictionRecord JSONL file(s)")
      ->required();
  report->add_option("--reference", reference, "reference predictions for agreement rates");
  report->add_option("--name", options.report_name, "report subdirectory name");
  report->add_flag("!--no-heatmaps", options.heatmaps, "skip SVG heatmaps");

  CLI11_PARSE(app, argc, argv);

  auto logger = spdlog::stderr_color_mt("care");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(flags.log_level));

  const std::string name = app.get_subcommands().front()->get_name();
  for (const auto& p : predictions) options.predictions.emplace_back(p);
  if (!reference.empty()) options.reference = reference;

  try {
    std::optional<fs::path> file;
    if (!flags.config.empty()) file = flags.config;
    const auto config = care::pipeline::load_pipeline_config(file, overrides(flags));
    const auto summary = care::pipeline::run_command(name, config, options);
    std::cout << summary.dump(2) << "\n";
    return 0;
  } catch (const care::Error& e) {
    const nlohmann::json err = {
        {"error", {{"kind", e.kind()}, {"message", e.what()}, {"command", name}}}};
    std::cerr << err.dump() << "\n";
    return e.kind() == "ConfigError" ? 2 : 1;
  } catch (const std::exception& e) {
    const nlohmann::json err = {
        {"error", {{"kind", "InternalError"}, {"message", e.what()}, {"command", name}}}};
    std::cerr << err.dump() << "\n";
    return 3;
  }
}
