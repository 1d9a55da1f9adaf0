#pragma once

// Pipeline commands. Each returns a JSON summary (printed by the CLI) and
// writes its artifacts under the configured output directory.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "care/corpus.hpp"
#include "care/distill.hpp"
#include "care/pipeline/artifacts.hpp"
#include "care/pipeline/config.hpp"
#include "care/trainer.hpp"

namespace care::pipeline {

struct CommandOptions {
  std::string split = "test";                        // predict / baseline target split
  std::vector<std::filesystem::path> predictions;    // report inputs
  std::optional<std::filesystem::path> reference;    // report: agreement reference
  std::string report_name;                           // default: first input's stem
  bool sweep = false;                                // train / predict
  bool heatmaps = true;                              // report
};

nlohmann::json run_ingest(const PipelineConfig& config);
nlohmann::json run_split(const PipelineConfig& config);
nlohmann::json run_validate(const PipelineConfig& config);
nlohmann::json run_build_index(const PipelineConfig& config);
nlohmann::json run_distill(const PipelineConfig& config);
nlohmann::json run_train(const PipelineConfig& config);
nlohmann::json run_predict(const PipelineConfig& config, const std::string& split);
nlohmann::json run_baseline(const PipelineConfig& config, const std::string& split);
nlohmann::json run_report(const PipelineConfig& config, const CommandOptions& options);

/// Dispatches by command name ("ingest", "split", ..., "report").
nlohmann::json run_command(const std::string& name, const PipelineConfig& config,
                           const CommandOptions& options);

// Shared loaders used by the commands and the sweep.

Corpus load_ingested_corpus(const Workspace& ws);
SplitAssignment load_split(const Workspace& ws, const Corpus& corpus);
Split split_from_key(const std::string& key);
ExemplarPools load_pools(const Workspace& ws);
RationaleSet load_rationale_set(const std::filesystem::path& path);

/// Annotated therapist utterances of the given sessions, in corpus order.
std::vector<std::string> split_utterance_ids(const Corpus& corpus,
                                             const std::set<std::string>& sessions);

/// Every utterance id in the given sessions (annotated or not).
std::set<std::string> all_utterance_ids(const Corpus& corpus,
                                        const std::set<std::string>& sessions);

ModelInstance model_instance(const Corpus& corpus, const std::string& utterance_id, int k,
                             const RationaleSet* rationales);

std::vector<TrainingExample> training_examples(const Corpus& corpus,
                                               const std::vector<std::string>& ids, int k,
                                               const RationaleSet* rationales);

std::vector<DistillInstance> distill_instances(const Corpus& corpus,
                                               const std::vector<std::string>& ids);

}  // namespace care::pipeline
