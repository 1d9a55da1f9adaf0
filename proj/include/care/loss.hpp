#pragma once

#include "care/prediction.hpp"

namespace care {

/// Hybrid ordinal loss, averaged over the six dimensions:
///   alpha * (E[label] - gold)^2 + beta * -log p(gold)
/// where E[label] is the probability-weighted expected label value.
struct LossValue {
  double total = 0.0;
  double mse = 0.0;  // mean over dimensions
  double ce = 0.0;   // mean over dimensions
  Logits grad{};     // d total / d logits
};

/// Throws LabelOutOfRangeError for gold labels outside [-2, +2] and
/// ConfigError when alpha or beta is negative or both are zero.
LossValue hybrid_loss(const Logits& logits, const Labels& gold, double alpha,
                      double beta);

/// Value only, from probabilities (allows exact one-hot predictions).
double hybrid_loss(const DimensionScores& pred, const Labels& gold, double alpha,
                   double beta);

}  // namespace care
