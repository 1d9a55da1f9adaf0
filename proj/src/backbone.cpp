#include "care/backbone.hpp"

#include <cmath>

#include "care/errors.hpp"
#include "care/kernels.hpp"
#include "care/random.hpp"

namespace care {

using kernels::Trans;

namespace {

Matrix gaussian(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.data) v = rng.normal() * stddev;
  return m;
}

void add_positions(Matrix& x) {
  const auto d = static_cast<double>(x.cols);
  for (std::size_t pos = 0; pos < x.rows; ++pos) {
    for (std::size_t i = 0; i < x.cols; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / d);
      x(pos, i) += std::sin(static_cast<double>(pos) * freq);
      if (i + 1 < x.cols) x(pos, i + 1) += std::cos(static_cast<double>(pos) * freq);
    }
  }
}

}  // namespace

Backbone::Backbone(const BackboneSpec& spec) : spec_(spec) {
  if (spec_.width == 0 || spec_.heads == 0 || spec_.width % spec_.heads != 0) {
    throw BackboneError("backbone width must be a positive multiple of heads");
  }
  Rng rng(spec_.seed);
  const double ws = 1.0 / std::sqrt(static_cast<double>(spec_.width));
  const double fs = 1.0 / std::sqrt(static_cast<double>(spec_.ffn_width));
  token_embedding_ = gaussian(spec_.vocab_size, spec_.width, 1.0, rng);
  for (std::size_t l = 0; l < spec_.layers; ++l) {
    Layer layer;
    layer.wq = gaussian(spec_.width, spec_.width, ws, rng);
    layer.wk = gaussian(spec_.width, spec_.width, ws, rng);
    layer.wv = gaussian(spec_.width, spec_.width, ws, rng);
    layer.wo = gaussian(spec_.width, spec_.width, ws, rng);
    layer.w1 = gaussian(spec_.width, spec_.ffn_width, ws, rng);
    layer.b1 = Matrix(1, spec_.ffn_width);
    layer.w2 = gaussian(spec_.ffn_width, spec_.width, fs, rng);
    layer.b2 = Matrix(1, spec_.width);
    layers_.push_back(std::move(layer));
  }
}

std::vector<LoraWeights> Backbone::init_adapters(std::size_t rank,
                                                 std::uint64_t seed) const {
  Rng rng(seed);
  const double s = 1.0 / std::sqrt(static_cast<double>(spec_.width));
  std::vector<LoraWeights> out;
  for (std::size_t l = 0; l < spec_.layers; ++l) {
    LoraWeights w;
    w.q_a = gaussian(spec_.width, rank, s, rng);
    w.q_b = Matrix(rank, spec_.width);
    w.v_a = gaussian(spec_.width, rank, s, rng);
    w.v_b = Matrix(rank, spec_.width);
    out.push_back(std::move(w));
  }
  return out;
}

Matrix Backbone::forward(std::span<const int> tokens,
                         std::span<const LoraWeights> adapters,
                         double adapter_multiplier, Tape* tape) const {
  if (tokens.empty()) throw BackboneError("cannot encode an empty token sequence");
  if (adapters.size() != layers_.size()) {
    throw ShapeMismatchError("one adapter set per backbone layer is required");
  }
  Matrix x(tokens.size(), spec_.width);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const auto id = static_cast<std::size_t>(tokens[t]);
    if (id >= spec_.vocab_size) throw BackboneError("token id outside vocabulary");
    auto src = token_embedding_.row(id);
    std::copy(src.begin(), src.end(), x.row(t).begin());
  }
  add_positions(x);
  if (tape != nullptr) tape->layers.assign(layers_.size(), LayerTape{});

  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& w = layers_[l];
    const LoraWeights& ad = adapters[l];
    LayerTape local;
    LayerTape& t = tape != nullptr ? tape->layers[l] : local;
    const Matrix a = nn::layer_norm(x, &t.ln1);
    t.q = nn::lora_linear(a, w.wq, ad.q_a, ad.q_b, adapter_multiplier, &t.q_cache);
    t.k = nn::linear(a, w.wk);
    t.v = nn::lora_linear(a, w.wv, ad.v_a, ad.v_b, adapter_multiplier, &t.v_cache);
    t.attn_out = nn::attention(t.q, t.k, t.v, spec_.heads, &t.attn);
    nn::add_inplace(x, nn::linear(t.attn_out, w.wo));
    t.ffn_in = nn::layer_norm(x, &t.ln2);
    t.ffn_pre = nn::linear(t.ffn_in, w.w1, &w.b1);
    t.ffn_act = nn::gelu(t.ffn_pre);
    nn::add_inplace(x, nn::linear(t.ffn_act, w.w2, &w.b2));
  }
  return nn::layer_norm(x, tape != nullptr ? &tape->final_ln : nullptr);
}

void Backbone::backward(const Tape& tape, std::span<const LoraWeights> adapters,
                        double adapter_multiplier, const Matrix& d_hidden,
                        std::span<LoraWeights> grads) const {
  Matrix dx = nn::layer_norm_backward(tape.final_ln, d_hidden);
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Layer& w = layers_[l];
    const LayerTape& t = tape.layers[l];
    const LoraWeights& ad = adapters[l];
    LoraWeights& g = grads[l];

    // x_out = x_mid + gelu(LN(x_mid) W1 + b1) W2 + b2
    Matrix d_act;
    nn::linear_backward(t.ffn_act, w.w2, dx, &d_act, nullptr, nullptr);
    const Matrix d_pre = nn::gelu_backward(t.ffn_pre, d_act);
    Matrix d_ffn_in;
    nn::linear_backward(t.ffn_in, w.w1, d_pre, &d_ffn_in, nullptr, nullptr);
    nn::add_inplace(dx, nn::layer_norm_backward(t.ln2, d_ffn_in));

    // x_mid = x_in + attention(q, k, v) Wo
    Matrix d_attn;
    nn::linear_backward(t.attn_out, w.wo, dx, &d_attn, nullptr, nullptr);
    Matrix dq, dk, dv;
    nn::attention_backward(t.q, t.k, t.v, spec_.heads, t.attn, d_attn, dq, dk, dv);
    const Matrix a = t.ln1.xhat;  // affine-free layer norm output
    Matrix da_q, da_k, da_v;
    nn::lora_linear_backward(a, w.wq, ad.q_a, ad.q_b, adapter_multiplier, t.q_cache,
                             dq, &da_q, g.q_a, g.q_b);
    nn::linear_backward(a, w.wk, dk, &da_k, nullptr, nullptr);
    nn::lora_linear_backward(a, w.wv, ad.v_a, ad.v_b, adapter_multiplier, t.v_cache,
                             dv, &da_v, g.v_a, g.v_b);
    nn::add_inplace(da_q, da_k);
    nn::add_inplace(da_q, da_v);
    nn::add_inplace(dx, nn::layer_norm_backward(t.ln1, da_q));
  }
}

}  // namespace care
