#pragma once

// Utterance / context / knowledge encoders, cross-attention fusion and six
// 5-way ordinal heads on a shared trunk.

#include <array>
#include <string>
#include <vector>

#include "care/backbone.hpp"
#include "care/context.hpp"
#include "care/loss.hpp"
#include "care/random.hpp"
#include "care/tokenizer.hpp"
#include "care/train_config.hpp"

namespace care {

enum class RepresentationKind { Utterance, Context, Knowledge };

/// Token-level hidden states (rows x hidden width); may have zero rows for a
/// disabled stream.
struct EncodedRepresentation {
  RepresentationKind kind = RepresentationKind::Utterance;
  Matrix tensor;
};

struct FusionWeights {
  Matrix wq, wk, wv, wo;
};

/// Everything the optimizer updates. Gradients use the same layout.
struct TrainableParams {
  std::vector<LoraWeights> adapters;  // one per backbone layer
  std::vector<FusionWeights> fusion;  // 1 shared, or 6 (one per dimension)
  Matrix head_w;                      // width x (6 * 5)
  Matrix head_b;                      // 1 x (6 * 5)

  /// Calls f(name, matrix) for every parameter in a fixed order.
  template <typename F>
  void visit(F&& f) {
    for (std::size_t l = 0; l < adapters.size(); ++l) {
      const auto p = "adapter." + std::to_string(l) + ".";
      f(p + "q_a", adapters[l].q_a);
      f(p + "q_b", adapters[l].q_b);
      f(p + "v_a", adapters[l].v_a);
      f(p + "v_b", adapters[l].v_b);
    }
    for (std::size_t m = 0; m < fusion.size(); ++m) {
      const auto p = "fusion." + std::to_string(m) + ".";
      f(p + "wq", fusion[m].wq);
      f(p + "wk", fusion[m].wk);
      f(p + "wv", fusion[m].wv);
      f(p + "wo", fusion[m].wo);
    }
    f(std::string("head.w"), head_w);
    f(std::string("head.b"), head_b);
  }
  template <typename F>
  void visit(F&& f) const {
    const_cast<TrainableParams*>(this)->visit(
        [&](const std::string& name, Matrix& m) { f(name, static_cast<const Matrix&>(m)); });
  }

  TrainableParams zeros_like() const;
  void add(const TrainableParams& other);
  void scale(double factor);
  double squared_norm() const;
  bool all_finite() const;

  friend bool operator==(const TrainableParams& a, const TrainableParams& b);
};

/// A therapist utterance prepared by the context and distillation stages.
struct ModelInstance {
  std::string utterance_id;
  ContextWindow window;  // target therapist turn last
  /// One rationale per dimension; empty text for FALLBACK_EMPTY or missing.
  std::array<std::string, kNumDimensions> rationales{};
  int k = kCareContextK;

  const std::string& utterance_text() const { return window.target().text; }
};

struct PreparedInput {
  std::vector<int> utterance;
  std::vector<int> context;                 // empty when context is disabled
  std::vector<std::vector<int>> knowledge;  // one per dimension, or none
};

/// One fused vector (1 x width) per fusion module.
struct FusedRepresentation {
  std::vector<Matrix> modules;
};

class CareModel {
 public:
  /// Initializes backbone, adapters, fusion and heads from the config seeds.
  explicit CareModel(TrainConfig config);
  CareModel(TrainConfig config, TrainableParams params);

  const TrainConfig& config() const noexcept { return config_; }
  const TrainableParams& params() const noexcept { return params_; }
  TrainableParams& params() noexcept { return params_; }
  const Tokenizer& tokenizer() const noexcept { return tokenizer_; }
  double adapter_multiplier() const noexcept;

  /// Tokenizes with truncation: context drops its oldest tokens, knowledge
  /// drops leading rationale tokens; the target utterance is never cut
  /// (InputTooLongError if it alone exceeds the limit).
  PreparedInput prepare(const ModelInstance& instance) const;

  EncodedRepresentation encode_utterance(const std::string& text) const;
  EncodedRepresentation encode_context(const ContextWindow& window) const;
  /// Encodes "<rationale>\n[SEP]\n<utterance>"; an empty rationale encodes
  /// the utterance alone.
  EncodedRepresentation encode_knowledge(const std::string& rationale,
                                         const std::string& utterance) const;

  /// Cross-attention: mean-pooled utterance states as the query, the rows of
  /// context and knowledge as keys/values. No positional terms are added.
  FusedRepresentation fuse(const EncodedRepresentation& utterance,
                           const EncodedRepresentation& context,
                           const EncodedRepresentation& knowledge) const;

  Logits logits(const FusedRepresentation& fused) const;
  DimensionScores predict_ordinal(const FusedRepresentation& fused) const;

  /// Eval-mode prediction (no dropout).
  DimensionScores predict(const PreparedInput& input) const;

  /// Training step for one instance: hybrid loss and accumulated gradients.
  /// `dropout_rng` null disables dropout.
  LossValue forward_backward(const PreparedInput& input, const Labels& gold,
                             Rng* dropout_rng, TrainableParams& grads) const;

 private:
  struct Trunk;
  Trunk run_trunk(const PreparedInput& input, bool keep_tape, Rng* dropout_rng) const;
  Logits head_logits(const std::vector<Matrix>& head_inputs) const;
  std::vector<int> context_tokens(const ContextWindow& window) const;
  std::vector<int> knowledge_tokens(const std::string& rationale,
                                    const std::string& utterance) const;
  std::vector<int> utterance_tokens(const std::string& text) const;
  Matrix encode_tokens(const std::vector<int>& tokens) const;

  TrainConfig config_;
  Tokenizer tokenizer_;
  Backbone backbone_;
  TrainableParams params_;
};

}  // namespace care
