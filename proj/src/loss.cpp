#include "care/loss.hpp"

#include <cmath>
#include <limits>

#include "care/errors.hpp"

namespace care {

namespace {

void check_weights(double alpha, double beta) {
  if (alpha < 0.0 || beta < 0.0 || (alpha == 0.0 && beta == 0.0)) {
    throw ConfigError("loss weights must be non-negative and not both zero");
  }
}

double expected_label(const ClassProbs& p) {
  double e = 0.0;
  for (std::size_t c = 0; c < kNumClasses; ++c) e += p[c] * class_to_label(c);
  return e;
}

double neg_log(double p) {
  return p > 0.0 ? -std::log(p) : std::numeric_limits<double>::infinity();
}

}  // namespace

LossValue hybrid_loss(const Logits& logits, const Labels& gold, double alpha,
                      double beta) {
  check_weights(alpha, beta);
  LossValue out;
  const double inv_dims = 1.0 / static_cast<double>(kNumDimensions);
  for (std::size_t d = 0; d < kNumDimensions; ++d) {
    const std::size_t g = label_to_class(gold[d]);
    const ClassProbs p = softmax(logits[d]);
    const double e = expected_label(p);
    const double diff = e - gold[d];
    // log-softmax keeps CE finite for saturated logits.
    double mx = logits[d][0];
    for (double z : logits[d]) mx = std::max(mx, z);
    double lse = 0.0;
    for (double z : logits[d]) lse += std::exp(z - mx);
    const double ce = -(logits[d][g] - mx - std::log(lse));
    out.mse += diff * diff * inv_dims;
    out.ce += ce * inv_dims;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      // dE/dz_c = p_c (v_c - E);  dCE/dz_c = p_c - [c == g]
      const double d_mse = 2.0 * diff * p[c] * (class_to_label(c) - e);
      const double d_ce = p[c] - (c == g ? 1.0 : 0.0);
      out.grad[d][c] = (alpha * d_mse + beta * d_ce) * inv_dims;
    }
  }
  out.total = alpha * out.mse + beta * out.ce;
  return out;
}

double hybrid_loss(const DimensionScores& pred, const Labels& gold, double alpha,
                   double beta) {
  check_weights(alpha, beta);
  double total = 0.0;
  for (std::size_t d = 0; d < kNumDimensions; ++d) {
    const std::size_t g = label_to_class(gold[d]);
    const double diff = expected_label(pred[d].probs) - gold[d];
    // 0 * inf is treated as 0 so a pure-MSE loss stays finite.
    const double ce = beta == 0.0 ? 0.0 : beta * neg_log(pred[d].probs[g]);
    total += alpha * diff * diff + ce;
  }
  return total / static_cast<double>(kNumDimensions);
}

}  // namespace care
