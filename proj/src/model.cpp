#include "care/model.hpp"

#include <cmath>

#include <spdlog/spdlog.h>

#include "care/errors.hpp"
#include "care/hashing.hpp"
#include "care/kernels.hpp"

namespace care {

using kernels::Trans;

namespace {

Matrix gaussian(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.data) v = rng.normal() * stddev;
  return m;
}

BackboneSpec backbone_spec(const TrainConfig& c) {
  return BackboneSpec{c.vocab_size, c.hidden_width, c.layers, c.heads, c.ffn_width,
                      c.backbone_seed};
}

std::size_t module_count(const TrainConfig& c) {
  return c.fusion_per_dimension ? kNumDimensions : 1;
}

std::size_t module_of(const TrainConfig& c, std::size_t dim) {
  return c.fusion_per_dimension ? dim : 0;
}

TrainableParams init_params(const TrainConfig& c, const Backbone& backbone) {
  TrainableParams p;
  p.adapters = backbone.init_adapters(c.adapter_rank, mix64(c.seed ^ 0xada97e5ULL));
  Rng rng(mix64(c.seed ^ 0xf05e0ULL));
  const std::size_t w = c.hidden_width;
  const double s = 1.0 / std::sqrt(static_cast<double>(w));
  for (std::size_t m = 0; m < module_count(c); ++m) {
    FusionWeights f;
    f.wq = gaussian(w, w, s, rng);
    f.wk = gaussian(w, w, s, rng);
    f.wv = gaussian(w, w, s, rng);
    f.wo = gaussian(w, w, s, rng);
    p.fusion.push_back(std::move(f));
  }
  p.head_w = gaussian(w, kNumDimensions * kNumClasses, s, rng);
  p.head_b = Matrix(1, kNumDimensions * kNumClasses);
  return p;
}

void check_same_shape(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows || a.cols != b.cols) {
    throw ShapeMismatchError("parameter shapes differ");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// TrainableParams

TrainableParams TrainableParams::zeros_like() const {
  TrainableParams z = *this;
  z.visit([](const std::string&, Matrix& m) { m.fill(0.0); });
  return z;
}

void TrainableParams::add(const TrainableParams& other) {
  std::vector<const Matrix*> src;
  other.visit([&](const std::string&, const Matrix& m) { src.push_back(&m); });
  std::size_t i = 0;
  visit([&](const std::string&, Matrix& m) {
    if (i >= src.size()) throw ShapeMismatchError("parameter sets differ in size");
    check_same_shape(m, *src[i]);
    for (std::size_t j = 0; j < m.size(); ++j) m.data[j] += src[i]->data[j];
    ++i;
  });
  if (i != src.size()) throw ShapeMismatchError("parameter sets differ in size");
}

void TrainableParams::scale(double factor) {
  visit([&](const std::string&, Matrix& m) {
    for (double& v : m.data) v *= factor;
  });
}

double TrainableParams::squared_norm() const {
  double s = 0.0;
  visit([&](const std::string&, const Matrix& m) {
    for (double v : m.data) s += v * v;
  });
  return s;
}

bool TrainableParams::all_finite() const {
  bool ok = true;
  visit([&](const std::string&, const Matrix& m) {
    for (double v : m.data) ok = ok && std::isfinite(v);
  });
  return ok;
}

bool operator==(const TrainableParams& a, const TrainableParams& b) {
  std::vector<const Matrix*> lhs, rhs;
  a.visit([&](const std::string&, const Matrix& m) { lhs.push_back(&m); });
  b.visit([&](const std::string&, const Matrix& m) { rhs.push_back(&m); });
  if (lhs.size() != rhs.size()) return false;
  for (std::size_t i = 0; i < lhs.size(); ++i) {
    if (!(*lhs[i] == *rhs[i])) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// CareModel

struct CareModel::Trunk {
  struct Module {
    Matrix q, k, v;
    nn::AttentionCache cache;
    Matrix attn;
    Matrix fused;     // attn Wo
    Matrix head_in;   // fused after dropout
    Matrix mask;      // dropout multipliers, empty when dropout is off
  };
  Backbone::Tape utt_tape, ctx_tape;
  std::vector<Backbone::Tape> kd_tapes;
  Matrix utt_h;
  std::size_t ctx_rows = 0;
  std::vector<std::size_t> kd_rows;
  bool keys_are_utterance = false;
  Matrix query;
  Matrix keys;
  std::vector<Module> modules;
};

CareModel::CareModel(TrainConfig config)
    : config_(std::move(config)),
      tokenizer_(config_.vocab_size),
      backbone_(backbone_spec(config_)) {
  config_.validate();
  params_ = init_params(config_, backbone_);
}

CareModel::CareModel(TrainConfig config, TrainableParams params)
    : config_(std::move(config)),
      tokenizer_(config_.vocab_size),
      backbone_(backbone_spec(config_)),
      params_(std::move(params)) {
  config_.validate();
  const TrainableParams expected = init_params(config_, backbone_);
  std::vector<const Matrix*> want;
  expected.visit([&](const std::string&, const Matrix& m) { want.push_back(&m); });
  std::size_t i = 0;
  params_.visit([&](const std::string& name, const Matrix& m) {
    if (i >= want.size() || m.rows != want[i]->rows || m.cols != want[i]->cols) {
      throw ShapeMismatchError("parameter '" + name + "' does not match the config");
    }
    ++i;
  });
  if (i != want.size()) throw ShapeMismatchError("parameter count does not match the config");
}

double CareModel::adapter_multiplier() const noexcept {
  return config_.adapter_scale / static_cast<double>(config_.adapter_rank);
}

std::vector<int> CareModel::utterance_tokens(const std::string& text) const {
  auto ids = tokenizer_.encode(text);
  // Punctuation-only turns still need one position to attend from.
  if (ids.empty()) ids.push_back(Tokenizer::kSepId);
  if (ids.size() > config_.max_sequence_length) {
    throw InputTooLongError("target utterance has " + std::to_string(ids.size()) +
                            " tokens, limit is " +
                            std::to_string(config_.max_sequence_length));
  }
  return ids;
}

std::vector<int> CareModel::context_tokens(const ContextWindow& window) const {
  // Tokenized turn by turn so the target's own tokens are known exactly.
  std::vector<int> ids;
  for (const auto& turn : window.turns) {
    auto t = tokenizer_.encode(speaker_prefix(turn.speaker) + ": " + turn.text);
    ids.insert(ids.end(), t.begin(), t.end());
  }
  const auto target = tokenizer_.encode(speaker_prefix(window.target().speaker) + ": " +
                                        window.target().text);
  if (target.size() > config_.max_sequence_length) {
    throw InputTooLongError("target turn alone exceeds the sequence limit");
  }
  if (ids.size() > config_.max_sequence_length) {
    const auto drop = ids.size() - config_.max_sequence_length;
    spdlog::warn("context for {} truncated by {} leading tokens",
                 window.target_utterance_id, drop);
    ids.erase(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(drop));
  }
  return ids;
}

std::vector<int> CareModel::knowledge_tokens(const std::string& rationale,
                                             const std::string& utterance) const {
  auto utt = utterance_tokens(utterance);
  auto ids = tokenizer_.encode(rationale);
  if (ids.empty()) return utt;
  const std::size_t budget = config_.max_sequence_length - utt.size();
  if (ids.size() + 1 > budget) {
    const std::size_t keep = budget > 0 ? budget - 1 : 0;
    spdlog::warn("rationale truncated from {} to {} tokens", ids.size(), keep);
    ids.erase(ids.begin(), ids.end() - static_cast<std::ptrdiff_t>(keep));
    if (keep == 0) return utt;
  }
  ids.push_back(Tokenizer::kSepId);
  ids.insert(ids.end(), utt.begin(), utt.end());
  return ids;
}

PreparedInput CareModel::prepare(const ModelInstance& instance) const {
  if (instance.window.turns.empty()) {
    throw EmptyInputError("instance " + instance.utterance_id + " has no turns");
  }
  PreparedInput in;
  in.utterance = utterance_tokens(instance.utterance_text());
  if (config_.use_context) in.context = context_tokens(instance.window);
  if (config_.use_knowledge) {
    for (const auto& r : instance.rationales) {
      in.knowledge.push_back(knowledge_tokens(r, instance.utterance_text()));
    }
  }
  return in;
}

Matrix CareModel::encode_tokens(const std::vector<int>& tokens) const {
  return backbone_.forward(tokens, params_.adapters, adapter_multiplier(), nullptr);
}

EncodedRepresentation CareModel::encode_utterance(const std::string& text) const {
  return {RepresentationKind::Utterance, encode_tokens(utterance_tokens(text))};
}

EncodedRepresentation CareModel::encode_context(const ContextWindow& window) const {
  return {RepresentationKind::Context, encode_tokens(context_tokens(window))};
}

EncodedRepresentation CareModel::encode_knowledge(const std::string& rationale,
                                                  const std::string& utterance) const {
  return {RepresentationKind::Knowledge,
          encode_tokens(knowledge_tokens(rationale, utterance))};
}

FusedRepresentation CareModel::fuse(const EncodedRepresentation& utterance,
                                    const EncodedRepresentation& context,
                                    const EncodedRepresentation& knowledge) const {
  if (utterance.tensor.rows == 0) throw EmptyInputError("utterance representation is empty");
  const Matrix query = nn::mean_rows(utterance.tensor);
  Matrix keys = vstack(context.tensor, knowledge.tensor);
  if (keys.rows == 0) keys = utterance.tensor;
  if (keys.cols != query.cols) throw ShapeMismatchError("representation widths differ");
  FusedRepresentation out;
  for (const auto& f : params_.fusion) {
    const Matrix q = nn::linear(query, f.wq);
    const Matrix k = nn::linear(keys, f.wk);
    const Matrix v = nn::linear(keys, f.wv);
    out.modules.push_back(
        nn::linear(nn::attention(q, k, v, config_.fusion_heads, nullptr), f.wo));
  }
  return out;
}

Logits CareModel::head_logits(const std::vector<Matrix>& head_inputs) const {
  Logits z{};
  for (std::size_t d = 0; d < kNumDimensions; ++d) {
    const Matrix& h = head_inputs.at(module_of(config_, d));
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      const std::size_t col = d * kNumClasses + c;
      double s = params_.head_b.data[col];
      for (std::size_t i = 0; i < h.cols; ++i) s += h.data[i] * params_.head_w(i, col);
      z[d][c] = s;
    }
  }
  return z;
}

Logits CareModel::logits(const FusedRepresentation& fused) const {
  if (fused.modules.size() != params_.fusion.size()) {
    throw ShapeMismatchError("fused representation does not match the fusion modules");
  }
  return head_logits(fused.modules);
}

DimensionScores CareModel::predict_ordinal(const FusedRepresentation& fused) const {
  return scores_from_logits(logits(fused));
}

CareModel::Trunk CareModel::run_trunk(const PreparedInput& input, bool keep_tape,
                                      Rng* dropout_rng) const {
  Trunk t;
  const double mult = adapter_multiplier();
  t.utt_h = backbone_.forward(input.utterance, params_.adapters, mult,
                              keep_tape ? &t.utt_tape : nullptr);
  t.query = nn::mean_rows(t.utt_h);
  if (!input.context.empty()) {
    t.keys = backbone_.forward(input.context, params_.adapters, mult,
                               keep_tape ? &t.ctx_tape : nullptr);
    t.ctx_rows = t.keys.rows;
  }
  t.kd_tapes.resize(input.knowledge.size());
  for (std::size_t d = 0; d < input.knowledge.size(); ++d) {
    Matrix h = backbone_.forward(input.knowledge[d], params_.adapters, mult,
                                 keep_tape ? &t.kd_tapes[d] : nullptr);
    t.kd_rows.push_back(h.rows);
    t.keys = vstack(t.keys, h);
  }
  if (t.keys.rows == 0) {
    t.keys = t.utt_h;
    t.keys_are_utterance = true;
  }

  const double p = dropout_rng != nullptr ? config_.dropout : 0.0;
  for (const auto& f : params_.fusion) {
    Trunk::Module m;
    m.q = nn::linear(t.query, f.wq);
    m.k = nn::linear(t.keys, f.wk);
    m.v = nn::linear(t.keys, f.wv);
    m.attn = nn::attention(m.q, m.k, m.v, config_.fusion_heads, keep_tape ? &m.cache : nullptr);
    m.fused = nn::linear(m.attn, f.wo);
    m.head_in = m.fused;
    if (p > 0.0) {
      m.mask = Matrix(1, m.fused.cols);
      for (double& v : m.mask.data) v = dropout_rng->uniform() < p ? 0.0 : 1.0 / (1.0 - p);
      for (std::size_t i = 0; i < m.head_in.size(); ++i) m.head_in.data[i] *= m.mask.data[i];
    }
    t.modules.push_back(std::move(m));
  }
  return t;
}

DimensionScores CareModel::predict(const PreparedInput& input) const {
  Trunk t = run_trunk(input, false, nullptr);
  std::vector<Matrix> inputs;
  for (auto& m : t.modules) inputs.push_back(std::move(m.head_in));
  return scores_from_logits(head_logits(inputs));
}

LossValue CareModel::forward_backward(const PreparedInput& input, const Labels& gold,
                                      Rng* dropout_rng, TrainableParams& grads) const {
  Trunk t = run_trunk(input, true, dropout_rng);
  std::vector<Matrix> inputs;
  for (const auto& m : t.modules) inputs.push_back(m.head_in);
  LossValue loss = hybrid_loss(head_logits(inputs), gold, config_.alpha, config_.beta);
  if (!std::isfinite(loss.total)) return loss;

  const std::size_t width = config_.hidden_width;
  // Heads.
  std::vector<Matrix> d_head_in(t.modules.size(), Matrix(1, width));
  for (std::size_t d = 0; d < kNumDimensions; ++d) {
    const std::size_t mi = module_of(config_, d);
    const Matrix& h = inputs[mi];
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      const std::size_t col = d * kNumClasses + c;
      const double g = loss.grad[d][c];
      grads.head_b.data[col] += g;
      for (std::size_t i = 0; i < width; ++i) {
        grads.head_w(i, col) += h.data[i] * g;
        d_head_in[mi].data[i] += params_.head_w(i, col) * g;
      }
    }
  }

  // Fusion modules.
  Matrix d_query(1, width);
  Matrix d_keys(t.keys.rows, width);
  for (std::size_t mi = 0; mi < t.modules.size(); ++mi) {
    const auto& m = t.modules[mi];
    const auto& f = params_.fusion[mi];
    auto& g = grads.fusion[mi];
    Matrix d_fused = d_head_in[mi];
    if (!m.mask.empty()) {
      for (std::size_t i = 0; i < d_fused.size(); ++i) d_fused.data[i] *= m.mask.data[i];
    }
    Matrix d_attn;
    nn::linear_backward(m.attn, f.wo, d_fused, &d_attn, &g.wo, nullptr);
    Matrix dq, dk, dv;
    nn::attention_backward(m.q, m.k, m.v, config_.fusion_heads, m.cache, d_attn, dq, dk, dv);
    Matrix dx;
    nn::linear_backward(t.query, f.wq, dq, &dx, &g.wq, nullptr);
    nn::add_inplace(d_query, dx);
    nn::linear_backward(t.keys, f.wk, dk, &dx, &g.wk, nullptr);
    nn::add_inplace(d_keys, dx);
    nn::linear_backward(t.keys, f.wv, dv, &dx, &g.wv, nullptr);
    nn::add_inplace(d_keys, dx);
  }

  // Back into the encoders. Mean pooling spreads d_query evenly over tokens.
  const double mult = adapter_multiplier();
  Matrix d_utt(t.utt_h.rows, width);
  const double inv = 1.0 / static_cast<double>(t.utt_h.rows);
  for (std::size_t r = 0; r < d_utt.rows; ++r) {
    for (std::size_t c = 0; c < width; ++c) d_utt(r, c) = d_query.data[c] * inv;
  }
  if (t.keys_are_utterance) nn::add_inplace(d_utt, d_keys);
  backbone_.backward(t.utt_tape, params_.adapters, mult, d_utt, grads.adapters);

  auto slice = [&](std::size_t first, std::size_t rows) {
    Matrix out(rows, width);
    std::copy_n(d_keys.data.begin() + static_cast<std::ptrdiff_t>(first * width),
                rows * width, out.data.begin());
    return out;
  };
  if (!t.keys_are_utterance) {
    std::size_t offset = 0;
    if (t.ctx_rows > 0) {
      backbone_.backward(t.ctx_tape, params_.adapters, mult, slice(0, t.ctx_rows),
                         grads.adapters);
      offset = t.ctx_rows;
    }
    for (std::size_t d = 0; d < t.kd_tapes.size(); ++d) {
      backbone_.backward(t.kd_tapes[d], params_.adapters, mult,
                         slice(offset, t.kd_rows[d]), grads.adapters);
      offset += t.kd_rows[d];
    }
  }
  return loss;
}

}  // namespace care
