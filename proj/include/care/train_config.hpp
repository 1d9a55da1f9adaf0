#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

namespace care {

/// Optimization and architecture settings. Defaults follow the reference
/// setup (alpha = beta = 0.5, AdamW lr 1e-5, batch 16, dropout 0.2, weight
/// decay 0.01, clip 1.0, max length 4096, 10 epochs, seed 42, adapter rank
/// 16 with scale 32) on the bundled tiny backbone.
struct TrainConfig {
  // loss
  double alpha = 0.5;
  double beta = 0.5;
  // optimizer
  double learning_rate = 1e-5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double weight_decay = 0.01;
  double gradient_clip = 1.0;
  std::size_t batch_size = 16;
  std::size_t epochs = 10;
  std::uint64_t seed = 42;
  // input preparation
  int k = 3;
  std::size_t max_sequence_length = 4096;
  bool use_context = true;
  bool use_knowledge = true;
  // adapters
  std::size_t adapter_rank = 16;
  double adapter_scale = 32.0;  // effective LoRA multiplier is scale / rank
  // tiny backbone
  std::size_t vocab_size = 4096;
  std::size_t hidden_width = 64;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t ffn_width = 256;
  std::uint64_t backbone_seed = 1234;
  // fusion + heads
  std::size_t fusion_heads = 4;
  bool fusion_per_dimension = false;  // six fusion modules instead of one shared
  double dropout = 0.2;

  /// Throws ConfigError on invalid settings.
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
/// Missing keys keep their defaults; unknown keys are a ConfigError.
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Digest of the canonical JSON form; identifies a checkpoint.
std::string config_fingerprint(const TrainConfig& c);

}  // namespace care
