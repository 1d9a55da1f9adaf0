#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "care/errors.hpp"
#include "care/metrics.hpp"
#include "oracles/oracles.hpp"

using namespace care;

namespace {

std::vector<Labels> one_dimension(const std::vector<int>& v) {
  std::vector<Labels> out;
  for (int x : v) out.push_back({x, 0, 0, 0, 0, 0});
  return out;
}

PredictionRecord record(const std::string& id, const Labels& l) {
  PredictionRecord r;
  r.utterance_id = id;
  r.scores = degenerate_scores(l);
  return r;
}

void check_against_oracle(const DimensionMetrics& m, const oracle::NaiveDimension& o) {
  const double tol = 1e-9;
  CHECK(std::abs(m.averages.accuracy - o.accuracy) < tol);
  CHECK(std::abs(m.averages.macro_precision - o.macro_p) < tol);
  CHECK(std::abs(m.averages.macro_recall - o.macro_r) < tol);
  CHECK(std::abs(m.averages.macro_f1 - o.macro_f1) < tol);
  CHECK(std::abs(m.averages.weighted_precision - o.weighted_p) < tol);
  CHECK(std::abs(m.averages.weighted_recall - o.weighted_r) < tol);
  CHECK(std::abs(m.averages.weighted_f1 - o.weighted_f1) < tol);
  for (std::size_t g = 0; g < 5; ++g)
    for (std::size_t p = 0; p < 5; ++p)
      CHECK(static_cast<long>(m.confusion.counts[g][p]) == o.confusion[g][p]);
}

}  // namespace

TEST_CASE("confusion tallies") {
  const std::vector<int> gold = {2, 2}, pred = {1, 2};
  const auto cm = confusion_matrix(gold, pred);
  CHECK(cm.counts[4][3] == 1);
  CHECK(cm.counts[4][4] == 1);
  CHECK(cm.total() == 2);
  const auto rn = cm.row_normalized();
  CHECK(rn[4][3] == 0.5);
  CHECK(rn[0] == std::array<double, 5>{});

  const std::vector<int> all = {-2, -1, 0, 1, 2, 2};
  const auto diag = confusion_matrix(all, all);
  for (std::size_t g = 0; g < 5; ++g)
    for (std::size_t p = 0; p < 5; ++p)
      if (g != p) CHECK(diag.counts[g][p] == 0);

  CHECK(confusion_matrix(std::vector<int>{}, std::vector<int>{}).total() == 0);
  CHECK_THROWS_AS(confusion_matrix(gold, std::vector<int>{1}), LengthMismatchError);
}

TEST_CASE("hand-derived four-instance case") {
  const auto r = classification_metrics(one_dimension({-2, 2, 2, 2}), one_dimension({-2, -2, 2, 2}));
  const auto& m = r.dimensions[0];
  CHECK(m.averages.accuracy == 0.75);
  CHECK(m.classes[0].precision == 1.0);
  CHECK(m.classes[0].recall == 0.5);
  CHECK(m.classes[0].f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(m.classes[4].precision == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(m.classes[4].recall == 1.0);
  CHECK(m.classes[4].f1 == doctest::Approx(0.8).epsilon(1e-15));
  // macro over the two present classes; weights 0.5 each
  CHECK(m.averages.macro_f1 == doctest::Approx((2.0 / 3.0 + 0.8) / 2).epsilon(1e-15));
  CHECK(m.averages.weighted_f1 == doctest::Approx((2.0 / 3.0 + 0.8) / 2).epsilon(1e-15));
  CHECK(m.averages.macro_precision == doctest::Approx((1.0 + 2.0 / 3.0) / 2).epsilon(1e-15));
  CHECK(m.classes[2].support == 0);
}

TEST_CASE("perfect predictions") {
  const auto labels = one_dimension({-2, -1, 0, 1, 2, 0, 0});
  const auto r = classification_metrics(labels, labels);
  for (const auto& d : r.dimensions) {
    CHECK(d.averages.accuracy == 1.0);
    CHECK(d.averages.macro_f1 == 1.0);
    CHECK(d.averages.weighted_f1 == 1.0);
  }
  CHECK(r.pooled.weighted_f1 == 1.0);
}

TEST_CASE("random prediction sets agree with the naive implementation") {
  std::mt19937_64 gen(31);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 1 + gen() % 80;
    std::vector<Labels> gold(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t d = 0; d < 6; ++d) {
        gold[i][d] = static_cast<int>(gen() % 5) - 2;
        // bias predictions toward gold so every regime occurs
        pred[i][d] = gen() % 3 == 0 ? gold[i][d] : static_cast<int>(gen() % 5) - 2;
      }
    }
    const auto report = classification_metrics(pred, gold);
    double pooled_wf1 = 0.0;
    for (std::size_t d = 0; d < 6; ++d) {
      std::vector<int> g, p;
      for (std::size_t i = 0; i < n; ++i) {
        g.push_back(gold[i][d]);
        p.push_back(pred[i][d]);
      }
      const auto o = oracle::naive_metrics(g, p);
      check_against_oracle(report.dimensions[d], o);
      pooled_wf1 += o.weighted_f1;
      // metrics from the matrix equal metrics from the vectors
      check_against_oracle(metrics_from_confusion(confusion_matrix(g, p, kAllDimensions[d])), o);
    }
    CHECK(std::abs(report.pooled.weighted_f1 - pooled_wf1 / 6) < 1e-9);

    // permutation invariance
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), gen);
    std::vector<Labels> gs, ps;
    for (auto i : order) {
      gs.push_back(gold[i]);
      ps.push_back(pred[i]);
    }
    const auto shuffled = classification_metrics(ps, gs);
    for (std::size_t d = 0; d < 6; ++d) {
      CHECK(std::abs(shuffled.dimensions[d].averages.weighted_f1 -
                     report.dimensions[d].averages.weighted_f1) < 1e-12);
      CHECK(shuffled.dimensions[d].confusion == report.dimensions[d].confusion);
    }
  }
}

TEST_CASE("balanced supports make weighted equal macro") {
  std::mt19937_64 gen(4);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<int> gold, pred;
    const int per = 1 + static_cast<int>(gen() % 5);
    for (int label = -2; label <= 2; ++label) {
      for (int i = 0; i < per; ++i) {
        gold.push_back(label);
        pred.push_back(static_cast<int>(gen() % 5) - 2);
      }
    }
    const auto m = metrics_from_confusion(confusion_matrix(gold, pred));
    CHECK(std::abs(m.averages.weighted_f1 - m.averages.macro_f1) < 1e-12);
  }
}

TEST_CASE("record-based metrics skip unscored rows and rows without gold") {
  std::map<std::string, Labels> gold = {{"a", {2, 2, 2, 2, 2, 2}}, {"b", {0, 0, 0, 0, 0, 0}}};
  std::vector<PredictionRecord> preds = {record("a", {2, 2, 2, 2, 2, 2}),
                                         record("b", {1, 0, 0, 0, 0, 0}),
                                         record("stranger", {0, 0, 0, 0, 0, 0})};
  PredictionRecord unscored;
  unscored.utterance_id = "b";
  preds.push_back(unscored);
  const auto r = classification_metrics(preds, gold);
  CHECK(r.scored == 2);
  CHECK(r.unscored == 1);
  CHECK(r.dimensions[0].averages.accuracy == 0.5);
  CHECK(r.dimensions[1].averages.accuracy == 1.0);

  CHECK_THROWS_AS(classification_metrics(std::vector<PredictionRecord>{unscored}, gold),
                  EmptyEvaluationError);
  CHECK_THROWS_AS(classification_metrics(std::vector<Labels>{}, std::vector<Labels>{}),
                  EmptyEvaluationError);
}

TEST_CASE("Cohen's kappa") {
  const std::vector<int> x = {-2, -1, 0, 1, 2, 2, 0};
  CHECK(cohen_kappa(x, x) == 1.0);
  const std::vector<int> a = {-2, -2, 2, 2}, b = {-2, 2, -2, 2};
  CHECK(cohen_kappa(a, b) == doctest::Approx(0.0));
  const std::vector<int> same = {1, 1, 1};
  CHECK(cohen_kappa(same, same) == 1.0);
  CHECK_THROWS_AS(cohen_kappa(a, same), LengthMismatchError);
  CHECK_THROWS_AS(cohen_kappa(std::vector<int>{}, std::vector<int>{}), EmptyInputError);

  std::mt19937_64 gen(12);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 2 + gen() % 60;
    std::vector<int> p(n), q(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = static_cast<int>(gen() % 5) - 2;
      q[i] = gen() % 2 ? p[i] : static_cast<int>(gen() % 5) - 2;
    }
    const double k = cohen_kappa(p, q);
    CHECK(std::abs(k - oracle::brute_kappa(p, q)) < 1e-9);
    CHECK(k >= -1.0);
    CHECK(k <= 1.0);
  }
}

TEST_CASE("agreement rate") {
  std::vector<PredictionRecord> a = {record("1", {2, 0, 0, 0, 0, 0}),
                                     record("2", {1, 0, 0, 0, 0, 0}),
                                     record("3", {0, 0, 0, 0, 0, 0})};
  auto b = a;
  CHECK(agreement_rate(a, b) == std::array<double, 6>{100, 100, 100, 100, 100, 100});
  b[2] = record("3", {-1, 0, 0, 0, 0, 0});
  const auto r = agreement_rate(a, b);
  CHECK(std::round(r[0] * 10) / 10 == 66.7);
  CHECK(r[1] == 100.0);
  CHECK_THROWS_AS(agreement_rate(a, std::vector<PredictionRecord>{record("x", {})}),
                  EmptyEvaluationError);
}

TEST_CASE("report rendering") {
  const auto r = classification_metrics(one_dimension({-2, 2, 2, 2}), one_dimension({-2, -2, 2, 2}));
  const auto csv = metrics_csv(r, "abc");
  CHECK(csv.rfind("# config_fingerprint=abc\n", 0) == 0);
  CHECK(csv.find("non_judgmental,75.00,83.33,75.00,73.33,83.33,75.00,73.33,4,0") !=
        std::string::npos);
  CHECK(csv.find("\npooled,") != std::string::npos);
  const auto j = to_json(r, "abc");
  CHECK(j["config_fingerprint"] == "abc");
  CHECK(as_percent(2.0 / 3.0) == 66.67);
  const auto svg = confusion_svg(r.dimensions[0].confusion);
  CHECK(svg.rfind("<svg", 0) == 0);
  const auto ccsv = confusion_csv(r.dimensions[0].confusion, "abc");
  CHECK(ccsv.find("# config_fingerprint=abc") == 0);
}
