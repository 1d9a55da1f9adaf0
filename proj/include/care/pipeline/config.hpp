#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "care/baselines.hpp"
#include "care/corpus.hpp"
#include "care/distill.hpp"
#include "care/teacher.hpp"
#include "care/train_config.hpp"

namespace care::pipeline {

/// Experiment grid expanded by `--sweep`.
struct SweepGrid {
  std::vector<int> k{1, 2, 3, 4, 5};
  std::vector<PolarityMode> polarity{PolarityMode::Both, PolarityMode::PositiveOnly,
                                     PolarityMode::NegativeOnly};
  std::vector<std::string> teachers;  // empty = the configured teacher only
};

struct PipelineConfig {
  std::filesystem::path utterances;
  std::optional<std::filesystem::path> annotations;

  std::optional<std::filesystem::path> split_file;
  SplitRatios ratios;
  std::uint64_t split_seed = kDefaultSeed;

  int care_k = 3;
  int baseline_k = 2;

  std::string embedding_provider = "hash";

  std::string teacher = "mock";
  DecodingParams decoding;
  int max_retries = 3;
  int retry_base_delay_ms = 1000;

  PolarityMode polarity = PolarityMode::Both;
  std::size_t top_n = 2;
  std::size_t parallelism = 4;

  TrainConfig train;

  std::string baseline_client = "mock";
  BaselineMode baseline_mode = BaselineMode::ZeroShot;

  SweepGrid sweep;

  std::filesystem::path output_dir = "care_out";

  RetryPolicy retry_policy() const;
  /// Digest of every setting that influences artifact contents (the output
  /// directory is excluded).
  std::string fingerprint() const;
};

nlohmann::json to_json(const PipelineConfig& c);

/// Parses the nested config document. Unknown keys and wrongly typed values
/// are ConfigErrors naming the field path (e.g. "train.epochs"). Relative
/// paths are resolved against `base_dir`.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j,
                                         const std::filesystem::path& base_dir = {});

/// Applies "a.b.c=value" overrides; the value is parsed as JSON and falls back
/// to a plain string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Reads the file (if given), applies overrides, parses. With no file the
/// defaults are used and relative paths resolve against the working directory.
PipelineConfig load_pipeline_config(const std::optional<std::filesystem::path>& file,
                                    const std::vector<std::string>& overrides);

}  // namespace care::pipeline
