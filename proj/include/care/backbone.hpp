#pragma once

// Tiny randomly initialized transformer encoder. Its own weights are frozen;
// low-rank adapters on the query and value projections are the trainable
// part and are owned by the caller.

#include <cstdint>
#include <span>
#include <vector>

#include "care/layers.hpp"
#include "care/tensor.hpp"

namespace care {

struct BackboneSpec {
  std::size_t vocab_size = 4096;
  std::size_t width = 64;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t ffn_width = 256;
  std::uint64_t seed = 1234;
};

/// Trainable adapters for one encoder layer: W_q + s*A_q*B_q, W_v + s*A_v*B_v.
struct LoraWeights {
  Matrix q_a, q_b, v_a, v_b;
};

class Backbone {
 public:
  explicit Backbone(const BackboneSpec& spec);

  const BackboneSpec& spec() const noexcept { return spec_; }

  struct LayerTape {
    nn::LayerNormCache ln1;
    nn::LoraCache q_cache, v_cache;
    Matrix q, k, v;
    nn::AttentionCache attn;
    Matrix attn_out;
    nn::LayerNormCache ln2;
    Matrix ffn_in, ffn_pre, ffn_act;
  };
  struct Tape {
    std::vector<LayerTape> layers;
    nn::LayerNormCache final_ln;
  };

  /// Token-level hidden states (tokens x width). Empty input is an error.
  Matrix forward(std::span<const int> tokens, std::span<const LoraWeights> adapters,
                 double adapter_multiplier, Tape* tape) const;

  /// Accumulates adapter gradients for d(loss)/d(hidden states).
  void backward(const Tape& tape, std::span<const LoraWeights> adapters,
                double adapter_multiplier, const Matrix& d_hidden,
                std::span<LoraWeights> grads) const;

  /// Fresh adapters: A ~ N(0, 1/width), B = 0, so the adapted model starts
  /// equal to the frozen one.
  std::vector<LoraWeights> init_adapters(std::size_t rank, std::uint64_t seed) const;

 private:
  struct Layer {
    Matrix wq, wk, wv, wo, w1, b1, w2, b2;
  };

  BackboneSpec spec_;
  Matrix token_embedding_;
  std::vector<Layer> layers_;
};

}  // namespace care
