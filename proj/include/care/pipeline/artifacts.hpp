#pragma once

// Output directory layout and the manifest that records every artifact with
// its producing command, content digest and config fingerprint.

#include <filesystem>
#include <string>
#include <string_view>

#include "care/pipeline/config.hpp"

namespace care::pipeline {

class Workspace {
 public:
  explicit Workspace(const PipelineConfig& config);

  const std::filesystem::path& root() const noexcept { return root_; }
  const std::string& config_fingerprint() const noexcept { return fingerprint_; }

  std::filesystem::path corpus_utterances() const { return root_ / "corpus" / "utterances.jsonl"; }
  std::filesystem::path corpus_annotations() const { return root_ / "corpus" / "annotations.jsonl"; }
  std::filesystem::path ingest_summary() const { return root_ / "corpus" / "ingest.json"; }
  std::filesystem::path split() const { return root_ / "split.json"; }
  std::filesystem::path validation_json() const { return root_ / "validation" / "report.json"; }
  std::filesystem::path validation_csv() const { return root_ / "validation" / "label_distribution.csv"; }
  std::filesystem::path index() const { return root_ / "index" / "pools.idx"; }
  std::filesystem::path index_summary() const { return root_ / "index" / "summary.json"; }
  std::filesystem::path rationales() const { return root_ / "distill" / "rationales.jsonl"; }
  std::filesystem::path coverage() const { return root_ / "distill" / "coverage.json"; }
  std::filesystem::path rationale_cache() const { return root_ / "distill" / "cache"; }
  std::filesystem::path model_dir() const { return root_ / "model"; }
  std::filesystem::path predictions(std::string_view split) const;
  std::filesystem::path baseline_predictions(std::string_view mode, std::string_view split) const;
  std::filesystem::path baseline_cache() const { return root_ / "baseline" / "cache"; }
  std::filesystem::path report_dir(std::string_view name) const { return root_ / "report" / name; }
  std::filesystem::path manifest() const { return root_ / "manifest.json"; }

  /// Throws MissingArtifactError naming the command that produces `path`.
  void require(const std::filesystem::path& path, std::string_view producer) const;

  /// Writes (via a temporary file and rename) and records the artifact.
  void write(const std::filesystem::path& path, const std::string& contents,
             std::string_view command) const;

  /// Records an artifact written by other means (e.g. a checkpoint file).
  void record(const std::filesystem::path& path, std::string_view command) const;

 private:
  std::filesystem::path root_;
  std::string fingerprint_;
};

std::string read_text(const std::filesystem::path& path);

}  // namespace care::pipeline
