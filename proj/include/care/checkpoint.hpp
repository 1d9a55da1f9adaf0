#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "care/model.hpp"
#include "care/trainer.hpp"

namespace care {

/// On-disk layout: config.json, adapter.bin, head.bin (fusion + heads),
/// metrics.csv and a fingerprint file.
struct ModelCheckpoint {
  TrainConfig config;
  TrainableParams params;
  std::vector<EpochMetrics> history;
  std::size_t best_epoch = 0;
  std::string corpus_fingerprint;

  /// Digest over the config fingerprint and every parameter's bytes.
  std::string fingerprint() const;
};

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& dir);
/// Throws MissingArtifactError for absent files, FingerprintMismatchError when
/// the stored fingerprint does not match the loaded contents.
ModelCheckpoint load_checkpoint(const std::filesystem::path& dir);

std::string history_csv(const std::vector<EpochMetrics>& history,
                        const std::string& config_fingerprint);

}  // namespace care
