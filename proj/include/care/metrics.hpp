#pragma once

// Evaluation statistics: confusion matrices, accuracy, macro and weighted
// precision/recall/F1, Cohen's kappa and per-dimension agreement rates.
//
// Conventions: per-class 0/0 is 0; macro averages run over the classes that
// occur in the gold labels; weighted averages use gold support as weights.
// Values are fractions in [0, 1]; the JSON/CSV writers render percentages
// with two decimals.

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "care/dimension.hpp"
#include "care/prediction.hpp"

namespace care {

using CountMatrix = std::array<std::array<std::size_t, kNumClasses>, kNumClasses>;

struct ConfusionMatrix {
  Dimension dimension = Dimension::NonJudgmental;
  CountMatrix counts{};  // [gold class][predicted class], class order -2..+2

  std::size_t total() const noexcept;
  /// Rows sum to 1; empty rows stay all-zero.
  std::array<std::array<double, kNumClasses>, kNumClasses> row_normalized() const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Labels are in [-2, +2]; spans must have equal length.
ConfusionMatrix confusion_matrix(std::span<const int> gold, std::span<const int> pred,
                                 Dimension dimension = Dimension::NonJudgmental);

/// Only scored records whose utterance id has a gold label are counted.
ConfusionMatrix confusion_matrix(std::span<const PredictionRecord> preds,
                                 const std::map<std::string, Labels>& gold,
                                 Dimension dimension);

struct ClassStats {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;    // gold count
  std::size_t predicted = 0;  // predicted count
};

struct Averages {
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double weighted_precision = 0.0;
  double weighted_recall = 0.0;
  double weighted_f1 = 0.0;
};

struct DimensionMetrics {
  Dimension dimension = Dimension::NonJudgmental;
  ConfusionMatrix confusion;
  std::array<ClassStats, kNumClasses> classes{};
  Averages averages;
};

struct MetricsReport {
  std::array<DimensionMetrics, kNumDimensions> dimensions{};
  Averages pooled;  // mean of the six per-dimension values
  std::size_t scored = 0;
  std::size_t unscored = 0;
};

/// Derives every statistic from a confusion matrix. Throws EmptyEvaluationError
/// when it holds no instances.
DimensionMetrics metrics_from_confusion(const ConfusionMatrix& cm);

/// Aligned label vectors (one Labels per instance).
MetricsReport classification_metrics(std::span<const Labels> preds,
                                     std::span<const Labels> golds);

/// Records keyed by utterance id; unscored records and records without gold
/// are excluded (unscored ones are counted). Throws EmptyEvaluationError when
/// nothing is left.
MetricsReport classification_metrics(std::span<const PredictionRecord> preds,
                                     const std::map<std::string, Labels>& gold);

/// (p_o - p_e) / (1 - p_e); 1.0 when both sequences use one identical label.
/// Throws LengthMismatchError / EmptyInputError.
double cohen_kappa(std::span<const int> a, std::span<const int> b);

/// Percentage of exact label matches per dimension over records present (and
/// scored) in both inputs. Throws EmptyEvaluationError.
std::array<double, kNumDimensions> agreement_rate(
    std::span<const PredictionRecord> preds, std::span<const PredictionRecord> reference);

/// Fraction rounded for presentation as a percentage with two decimals.
double as_percent(double fraction);

nlohmann::json to_json(const MetricsReport& report, const std::string& config_fingerprint);
/// One row per dimension plus "pooled"; first line "# config_fingerprint=<fp>".
std::string metrics_csv(const MetricsReport& report, const std::string& config_fingerprint);
std::string confusion_csv(const ConfusionMatrix& cm, const std::string& config_fingerprint);
/// Row-normalized heatmap as a standalone SVG document.
std::string confusion_svg(const ConfusionMatrix& cm);

}  // namespace care
