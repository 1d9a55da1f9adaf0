#pragma once

// AdamW training loop over CareModel with model selection on validation
// weighted F1, plus batched inference.

#include <set>
#include <span>
#include <string>
#include <vector>

#include "care/distill.hpp"
#include "care/exemplar_index.hpp"
#include "care/model.hpp"
#include "care/prediction.hpp"

namespace care {

struct TrainingExample {
  ModelInstance instance;
  Labels gold{};
};

struct EpochMetrics {
  std::size_t epoch = 0;  // 0 = initialization, before any update
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double train_weighted_f1 = 0.0;
  double val_accuracy = 0.0;
  double val_weighted_f1 = 0.0;

  friend bool operator==(const EpochMetrics&, const EpochMetrics&) = default;
};

/// Things that must never contain held-out (validation/test) utterances.
struct LeakageGuard {
  const ExemplarPools* pools = nullptr;
  const RationaleSet* rationales = nullptr;
  std::set<std::string> heldout_ids;
};

/// Throws DataLeakageError naming the first held-out id found in the pools,
/// in the exemplars of any rationale prompt, or among the training examples.
void check_leakage(const LeakageGuard& guard, std::span<const TrainingExample> train);

struct TrainResult {
  TrainableParams params;  // selected (best validation weighted F1) parameters
  std::vector<EpochMetrics> history;
  std::size_t best_epoch = 0;
};

/// Runs config.epochs epochs. history[0] evaluates the initialization, so
/// epochs = 0 returns the initial parameters with validation metrics computed
/// once. Selection falls back to training F1 when `val` is empty; ties keep
/// the earlier epoch. Throws NonFiniteLossError, DataLeakageError.
TrainResult train(std::span<const TrainingExample> train_set,
                  std::span<const TrainingExample> val_set, const TrainConfig& config,
                  const LeakageGuard& guard = {});

struct PredictionContext {
  std::string checkpoint_fingerprint;
  std::string config_fingerprint;
  std::string corpus_fingerprint;
};

/// One record per instance, in order. Throws FingerprintMismatchError when an
/// instance was prepared with a different k than the model was trained on.
std::vector<PredictionRecord> predict_batch(const CareModel& model,
                                            std::span<const ModelInstance> instances,
                                            const PredictionContext& ctx = {});

/// Eval-mode argmax labels for every example (parallel over examples).
std::vector<Labels> predict_labels(const CareModel& model,
                                   std::span<const PreparedInput> inputs);

}  // namespace care
