#include "care/train_config.hpp"

#include "care/errors.hpp"
#include "care/hashing.hpp"

namespace care {

using nlohmann::json;

#define CARE_TRAIN_CONFIG_FIELDS(X)                                           \
  X(alpha) X(beta) X(learning_rate) X(adam_beta1) X(adam_beta2) X(adam_epsilon) \
  X(weight_decay) X(gradient_clip) X(batch_size) X(epochs) X(seed) X(k)        \
  X(max_sequence_length) X(use_context) X(use_knowledge) X(adapter_rank)       \
  X(adapter_scale) X(vocab_size) X(hidden_width) X(layers) X(heads)            \
  X(ffn_width) X(backbone_seed) X(fusion_heads) X(fusion_per_dimension)        \
  X(dropout)

void TrainConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError("train." + field + ": " + why);
  };
  if (alpha < 0 || beta < 0 || (alpha == 0 && beta == 0)) {
    fail("alpha", "alpha and beta must be >= 0 and not both 0");
  }
  if (learning_rate < 0) fail("learning_rate", "must be non-negative");
  if (batch_size == 0) fail("batch_size", "must be positive");
  if (k < 0) fail("k", "must be non-negative");
  if (max_sequence_length < 2) fail("max_sequence_length", "must be at least 2");
  if (adapter_rank == 0) fail("adapter_rank", "must be positive");
  if (hidden_width == 0 || heads == 0 || hidden_width % heads != 0) {
    fail("heads", "hidden_width must be a positive multiple of heads");
  }
  if (fusion_heads == 0 || hidden_width % fusion_heads != 0) {
    fail("fusion_heads", "hidden_width must be a multiple of fusion_heads");
  }
  if (layers == 0) fail("layers", "must be positive");
  if (dropout < 0 || dropout >= 1) fail("dropout", "must be in [0, 1)");
  if (gradient_clip < 0) fail("gradient_clip", "must be non-negative");
  if (!use_context && !use_knowledge) {
    fail("use_context", "at least one of context and knowledge must be enabled");
  }
}

json to_json(const TrainConfig& c) {
  json j;
#define X(f) j[#f] = c.f;
  CARE_TRAIN_CONFIG_FIELDS(X)
#undef X
  return j;
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  if (!j.is_object()) throw ConfigError("train: expected an object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    try {
#define X(f)                         \
  if (key == #f) {                   \
    c.f = value.get<decltype(c.f)>(); \
    known = true;                    \
  }
      CARE_TRAIN_CONFIG_FIELDS(X)
#undef X
    } catch (const json::exception&) {
      throw ConfigError("train." + key + ": wrong type");
    }
    if (!known) throw ConfigError("train." + key + ": unknown field");
  }
  c.validate();
  return c;
}

std::string config_fingerprint(const TrainConfig& c) {
  return fingerprint(to_json(c).dump());
}

}  // namespace care
