#include "care/trainer.hpp"

#include <cmath>
#include <exception>
#include <numeric>

#include <spdlog/spdlog.h>

#include "care/errors.hpp"
#include "care/hashing.hpp"
#include "care/metrics.hpp"
#include "care/random.hpp"

namespace care {

void check_leakage(const LeakageGuard& guard, std::span<const TrainingExample> train) {
  const auto& held = guard.heldout_ids;
  if (held.empty()) return;
  if (guard.pools != nullptr) {
    for (const auto& id : guard.pools->source_ids()) {
      if (held.contains(id)) {
        throw DataLeakageError("held-out utterance " + id + " is in an exemplar pool");
      }
    }
  }
  if (guard.rationales != nullptr) {
    for (const auto& r : guard.rationales->rationales) {
      for (const auto& id : r.exemplar_ids) {
        if (held.contains(id)) {
          throw DataLeakageError("held-out utterance " + id +
                                 " appears in the rationale prompt for " + r.utterance_id);
        }
      }
    }
  }
  for (const auto& ex : train) {
    if (held.contains(ex.instance.utterance_id)) {
      throw DataLeakageError("held-out utterance " + ex.instance.utterance_id +
                             " is in the training set");
    }
  }
}

std::vector<Labels> predict_labels(const CareModel& model,
                                   std::span<const PreparedInput> inputs) {
  std::vector<Labels> out(inputs.size());
  std::vector<std::exception_ptr> errors(inputs.size());
  const auto n = static_cast<std::ptrdiff_t>(inputs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[i] = argmax_labels(model.predict(inputs[i]));
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

namespace {

struct Evaluation {
  double accuracy = 0.0;
  double weighted_f1 = 0.0;
};

Evaluation evaluate(const CareModel& model, std::span<const PreparedInput> inputs,
                    std::span<const Labels> gold) {
  if (inputs.empty()) return {};
  const auto preds = predict_labels(model, inputs);
  const auto report = classification_metrics(preds, gold);
  return {report.pooled.accuracy, report.pooled.weighted_f1};
}

struct AdamState {
  TrainableParams m, v;
  std::size_t step = 0;
};

void adamw_update(TrainableParams& params, const TrainableParams& grad, AdamState& st,
                  const TrainConfig& c) {
  ++st.step;
  const double b1 = c.adam_beta1, b2 = c.adam_beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(st.step));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(st.step));
  std::vector<const Matrix*> g;
  grad.visit([&](const std::string&, const Matrix& x) { g.push_back(&x); });
  std::vector<Matrix*> m, v;
  st.m.visit([&](const std::string&, Matrix& x) { m.push_back(&x); });
  st.v.visit([&](const std::string&, Matrix& x) { v.push_back(&x); });
  std::size_t k = 0;
  params.visit([&](const std::string&, Matrix& p) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[k]->data[i];
      double& mi = m[k]->data[i];
      double& vi = v[k]->data[i];
      mi = b1 * mi + (1.0 - b1) * gi;
      vi = b2 * vi + (1.0 - b2) * gi * gi;
      const double mhat = mi / corr1;
      const double vhat = vi / corr2;
      p.data[i] -= c.learning_rate *
                   (mhat / (std::sqrt(vhat) + c.adam_epsilon) + c.weight_decay * p.data[i]);
    }
    ++k;
  });
}

std::uint64_t dropout_seed(std::uint64_t seed, std::size_t epoch, std::size_t index) {
  return mix64(mix64(seed ^ 0xd209u) ^ mix64(epoch * 0x100000001b3ULL + index));
}

}  // namespace

TrainResult train(std::span<const TrainingExample> train_set,
                  std::span<const TrainingExample> val_set, const TrainConfig& config,
                  const LeakageGuard& guard) {
  config.validate();
  check_leakage(guard, train_set);
  if (train_set.empty()) throw EmptyInputError("training set is empty");

  CareModel model(config);
  auto prepare_all = [&](std::span<const TrainingExample> set) {
    std::vector<PreparedInput> inputs;
    std::vector<Labels> gold;
    for (const auto& ex : set) {
      if (ex.instance.k != config.k) {
        throw FingerprintMismatchError("instance " + ex.instance.utterance_id +
                                       " was prepared with a different k");
      }
      inputs.push_back(model.prepare(ex.instance));
      gold.push_back(ex.gold);
    }
    return std::pair{std::move(inputs), std::move(gold)};
  };
  const auto [train_inputs, train_gold] = prepare_all(train_set);
  const auto [val_inputs, val_gold] = prepare_all(val_set);
  const bool has_val = !val_inputs.empty();

  TrainResult result;
  auto record = [&](std::size_t epoch, double loss) {
    EpochMetrics em;
    em.epoch = epoch;
    em.train_loss = loss;
    const auto tr = evaluate(model, train_inputs, train_gold);
    em.train_accuracy = tr.accuracy;
    em.train_weighted_f1 = tr.weighted_f1;
    if (has_val) {
      const auto va = evaluate(model, val_inputs, val_gold);
      em.val_accuracy = va.accuracy;
      em.val_weighted_f1 = va.weighted_f1;
    }
    const double score = has_val ? em.val_weighted_f1 : em.train_weighted_f1;
    const auto& best = result.history.empty() ? em : result.history[result.best_epoch];
    const double best_score = has_val ? best.val_weighted_f1 : best.train_weighted_f1;
    result.history.push_back(em);
    if (epoch == 0 || score > best_score) {
      result.best_epoch = epoch;
      result.params = model.params();
    }
    spdlog::info("epoch {}: loss {:.4f} train wF1 {:.4f} val wF1 {:.4f}", epoch, loss,
                 em.train_weighted_f1, em.val_weighted_f1);
  };

  // Initialization loss (no dropout), so epoch 0 is comparable with later rows.
  {
    double total = 0.0;
    for (std::size_t i = 0; i < train_inputs.size(); ++i) {
      total += hybrid_loss(model.predict(train_inputs[i]), train_gold[i], config.alpha,
                           config.beta);
    }
    record(0, total / static_cast<double>(train_inputs.size()));
  }

  AdamState adam{model.params().zeros_like(), model.params().zeros_like(), 0};
  const TrainableParams zero = model.params().zeros_like();
  std::vector<std::size_t> order(train_inputs.size());

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffler(mix64(config.seed + epoch));
    shuffler.shuffle(order.begin(), order.end());

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t n = std::min(config.batch_size, order.size() - start);
      std::vector<TrainableParams> grads(n, zero);
      std::vector<double> losses(n, 0.0);
      std::vector<std::exception_ptr> errors(n);
      const auto sn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic)
      for (std::ptrdiff_t b = 0; b < sn; ++b) {
        try {
          const std::size_t idx = order[start + static_cast<std::size_t>(b)];
          Rng rng(dropout_seed(config.seed, epoch, idx));
          losses[b] = model
                          .forward_backward(train_inputs[idx], train_gold[idx],
                                            config.dropout > 0.0 ? &rng : nullptr, grads[b])
                          .total;
        } catch (...) {
          errors[b] = std::current_exception();
        }
      }
      for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
      }
      // Fixed-order reduction keeps results independent of thread count.
      TrainableParams g = zero;
      double batch_loss = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        if (!std::isfinite(losses[b])) {
          throw NonFiniteLossError("non-finite loss at epoch " + std::to_string(epoch));
        }
        g.add(grads[b]);
        batch_loss += losses[b];
      }
      g.scale(1.0 / static_cast<double>(n));
      const double norm = std::sqrt(g.squared_norm());
      if (!std::isfinite(norm)) {
        throw NonFiniteLossError("non-finite gradient at epoch " + std::to_string(epoch));
      }
      if (config.gradient_clip > 0.0 && norm > config.gradient_clip) {
        g.scale(config.gradient_clip / norm);
      }
      adamw_update(model.params(), g, adam, config);
      if (!model.params().all_finite()) {
        throw NonFiniteLossError("parameters became non-finite at epoch " +
                                 std::to_string(epoch));
      }
      epoch_loss += batch_loss;
    }
    record(epoch, epoch_loss / static_cast<double>(order.size()));
  }
  return result;
}

std::vector<PredictionRecord> predict_batch(const CareModel& model,
                                            std::span<const ModelInstance> instances,
                                            const PredictionContext& ctx) {
  std::vector<PreparedInput> inputs;
  inputs.reserve(instances.size());
  for (const auto& inst : instances) {
    if (inst.k != model.config().k) {
      throw FingerprintMismatchError(
          "instance " + inst.utterance_id + " uses k=" + std::to_string(inst.k) +
          " but the checkpoint was trained with k=" + std::to_string(model.config().k));
    }
    inputs.push_back(model.prepare(inst));
  }
  std::vector<PredictionRecord> out(inputs.size());
  std::vector<std::exception_ptr> errors(inputs.size());
  const auto n = static_cast<std::ptrdiff_t>(inputs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      auto& rec = out[i];
      rec.utterance_id = instances[i].utterance_id;
      rec.scores = model.predict(inputs[i]);
      rec.checkpoint = ctx.checkpoint_fingerprint;
      rec.config_fingerprint = ctx.config_fingerprint;
      rec.corpus_fingerprint = ctx.corpus_fingerprint;
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace care
