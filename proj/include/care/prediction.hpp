#pragma once

// Per-dimension ordinal score distributions and the PredictionRecord
// interchange format shared by the trained model and the prompt baselines.

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "care/dimension.hpp"

namespace care {

using ClassProbs = std::array<double, kNumClasses>;
using ClassLogits = std::array<double, kNumClasses>;
using Logits = std::array<ClassLogits, kNumDimensions>;

struct DimensionScore {
  ClassProbs probs{};     // index 0 <-> label -2 ... index 4 <-> label +2
  double expected = 0.0;  // sum_c p_c * label(c)
  int argmax = kMinLabel; // lowest class wins ties

  friend bool operator==(const DimensionScore&, const DimensionScore&) = default;
};

using DimensionScores = std::array<DimensionScore, kNumDimensions>;

ClassProbs softmax(const ClassLogits& logits);
DimensionScore score_from_probs(const ClassProbs& probs);
DimensionScore score_from_logits(const ClassLogits& logits);
DimensionScores scores_from_logits(const Logits& logits);
/// Probability 1 on each given label.
DimensionScores degenerate_scores(const Labels& labels);
Labels argmax_labels(const DimensionScores& scores);

struct PredictionRecord {
  std::string utterance_id;
  std::optional<DimensionScores> scores;  // nullopt for unscored baseline rows
  std::string checkpoint;                 // checkpoint fingerprint or client id
  std::string config_fingerprint;
  std::string corpus_fingerprint;
  nlohmann::json extra = nlohmann::json::object();  // e.g. mode, client_id, parse_status

  bool scored() const noexcept { return scores.has_value(); }
};

nlohmann::json to_json(const PredictionRecord& r);
PredictionRecord prediction_from_json(const nlohmann::json& j);

void write_predictions(std::span<const PredictionRecord> records, std::ostream& out);
std::vector<PredictionRecord> read_predictions(std::istream& in);

}  // namespace care
