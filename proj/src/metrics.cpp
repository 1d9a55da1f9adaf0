#include "care/metrics.hpp"

#include <cmath>
#include <unordered_map>

#include <fmt/format.h>

#include "care/errors.hpp"

namespace care {

using nlohmann::json;

std::size_t ConfusionMatrix::total() const noexcept {
  std::size_t n = 0;
  for (const auto& row : counts) {
    for (auto c : row) n += c;
  }
  return n;
}

std::array<std::array<double, kNumClasses>, kNumClasses> ConfusionMatrix::row_normalized()
    const {
  std::array<std::array<double, kNumClasses>, kNumClasses> out{};
  for (std::size_t g = 0; g < kNumClasses; ++g) {
    std::size_t row = 0;
    for (auto c : counts[g]) row += c;
    if (row == 0) continue;
    for (std::size_t p = 0; p < kNumClasses; ++p) {
      out[g][p] = static_cast<double>(counts[g][p]) / static_cast<double>(row);
    }
  }
  return out;
}

ConfusionMatrix confusion_matrix(std::span<const int> gold, std::span<const int> pred,
                                 Dimension dimension) {
  if (gold.size() != pred.size()) {
    throw LengthMismatchError("gold and predicted label counts differ");
  }
  ConfusionMatrix cm;
  cm.dimension = dimension;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    ++cm.counts[label_to_class(gold[i])][label_to_class(pred[i])];
  }
  return cm;
}

ConfusionMatrix confusion_matrix(std::span<const PredictionRecord> preds,
                                 const std::map<std::string, Labels>& gold,
                                 Dimension dimension) {
  ConfusionMatrix cm;
  cm.dimension = dimension;
  const auto d = dimension_index(dimension);
  for (const auto& r : preds) {
    if (!r.scored()) continue;
    const auto it = gold.find(r.utterance_id);
    if (it == gold.end()) continue;
    ++cm.counts[label_to_class(it->second[d])][label_to_class((*r.scores)[d].argmax)];
  }
  return cm;
}

namespace {

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

Averages mean_of(const std::array<DimensionMetrics, kNumDimensions>& dims) {
  Averages a;
  for (const auto& d : dims) {
    a.accuracy += d.averages.accuracy;
    a.macro_precision += d.averages.macro_precision;
    a.macro_recall += d.averages.macro_recall;
    a.macro_f1 += d.averages.macro_f1;
    a.weighted_precision += d.averages.weighted_precision;
    a.weighted_recall += d.averages.weighted_recall;
    a.weighted_f1 += d.averages.weighted_f1;
  }
  const double n = static_cast<double>(kNumDimensions);
  a.accuracy /= n;
  a.macro_precision /= n;
  a.macro_recall /= n;
  a.macro_f1 /= n;
  a.weighted_precision /= n;
  a.weighted_recall /= n;
  a.weighted_f1 /= n;
  return a;
}

}  // namespace

DimensionMetrics metrics_from_confusion(const ConfusionMatrix& cm) {
  const std::size_t total = cm.total();
  if (total == 0) throw EmptyEvaluationError("no scored instances to evaluate");
  DimensionMetrics m;
  m.dimension = cm.dimension;
  m.confusion = cm;
  std::size_t correct = 0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    auto& s = m.classes[c];
    const double tp = static_cast<double>(cm.counts[c][c]);
    correct += cm.counts[c][c];
    for (std::size_t o = 0; o < kNumClasses; ++o) {
      s.support += cm.counts[c][o];
      s.predicted += cm.counts[o][c];
    }
    s.precision = ratio(tp, static_cast<double>(s.predicted));
    s.recall = ratio(tp, static_cast<double>(s.support));
    s.f1 = ratio(2.0 * s.precision * s.recall, s.precision + s.recall);
    if (s.support == 0) continue;
    ++present;
    const double w = static_cast<double>(s.support);
    m.averages.macro_precision += s.precision;
    m.averages.macro_recall += s.recall;
    m.averages.macro_f1 += s.f1;
    m.averages.weighted_precision += w * s.precision;
    m.averages.weighted_recall += w * s.recall;
    m.averages.weighted_f1 += w * s.f1;
  }
  m.averages.macro_precision /= static_cast<double>(present);
  m.averages.macro_recall /= static_cast<double>(present);
  m.averages.macro_f1 /= static_cast<double>(present);
  m.averages.weighted_precision /= static_cast<double>(total);
  m.averages.weighted_recall /= static_cast<double>(total);
  m.averages.weighted_f1 /= static_cast<double>(total);
  m.averages.accuracy = static_cast<double>(correct) / static_cast<double>(total);
  return m;
}

MetricsReport classification_metrics(std::span<const Labels> preds,
                                     std::span<const Labels> golds) {
  if (preds.size() != golds.size()) {
    throw LengthMismatchError("gold and predicted instance counts differ");
  }
  if (preds.empty()) throw EmptyEvaluationError("no scored instances to evaluate");
  MetricsReport r;
  r.scored = preds.size();
  for (std::size_t d = 0; d < kNumDimensions; ++d) {
    ConfusionMatrix cm;
    cm.dimension = kAllDimensions[d];
    for (std::size_t i = 0; i < preds.size(); ++i) {
      ++cm.counts[label_to_class(golds[i][d])][label_to_class(preds[i][d])];
    }
    r.dimensions[d] = metrics_from_confusion(cm);
  }
  r.pooled = mean_of(r.dimensions);
  return r;
}

MetricsReport classification_metrics(std::span<const PredictionRecord> preds,
                                     const std::map<std::string, Labels>& gold) {
  std::vector<Labels> p, g;
  std::size_t unscored = 0;
  for (const auto& rec : preds) {
    const auto it = gold.find(rec.utterance_id);
    if (it == gold.end()) continue;
    if (!rec.scored()) {
      ++unscored;
      continue;
    }
    p.push_back(argmax_labels(*rec.scores));
    g.push_back(it->second);
  }
  MetricsReport r = classification_metrics(p, g);
  r.unscored = unscored;
  return r;
}

double cohen_kappa(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw LengthMismatchError("kappa inputs differ in length");
  if (a.empty()) throw EmptyInputError("kappa needs at least one pair");
  std::array<std::size_t, kNumClasses> ma{}, mb{};
  std::size_t agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto ca = label_to_class(a[i]);
    const auto cb = label_to_class(b[i]);
    ++ma[ca];
    ++mb[cb];
    if (ca == cb) ++agree;
  }
  const double n = static_cast<double>(a.size());
  const double po = static_cast<double>(agree) / n;
  double pe = 0.0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    pe += (static_cast<double>(ma[c]) / n) * (static_cast<double>(mb[c]) / n);
  }
  if (pe >= 1.0) return po >= 1.0 ? 1.0 : 0.0;
  return (po - pe) / (1.0 - pe);
}

std::array<double, kNumDimensions> agreement_rate(
    std::span<const PredictionRecord> preds, std::span<const PredictionRecord> reference) {
  std::unordered_map<std::string, const PredictionRecord*> ref;
  for (const auto& r : reference) {
    if (r.scored()) ref.emplace(r.utterance_id, &r);
  }
  std::array<std::size_t, kNumDimensions> hits{};
  std::size_t n = 0;
  for (const auto& p : preds) {
    if (!p.scored()) continue;
    const auto it = ref.find(p.utterance_id);
    if (it == ref.end()) continue;
    ++n;
    for (std::size_t d = 0; d < kNumDimensions; ++d) {
      if ((*p.scores)[d].argmax == (*it->second->scores)[d].argmax) ++hits[d];
    }
  }
  if (n == 0) throw EmptyEvaluationError("no aligned records to compare");
  std::array<double, kNumDimensions> out{};
  for (std::size_t d = 0; d < kNumDimensions; ++d) {
    out[d] = 100.0 * static_cast<double>(hits[d]) / static_cast<double>(n);
  }
  return out;
}

double as_percent(double fraction) { return std::round(fraction * 10000.0) / 100.0; }

namespace {

json averages_json(const Averages& a) {
  return {{"accuracy", as_percent(a.accuracy)},
          {"macro", {{"precision", as_percent(a.macro_precision)},
                     {"recall", as_percent(a.macro_recall)},
                     {"f1", as_percent(a.macro_f1)}}},
          {"weighted", {{"precision", as_percent(a.weighted_precision)},
                        {"recall", as_percent(a.weighted_recall)},
                        {"f1", as_percent(a.weighted_f1)}}}};
}

std::string averages_row(std::string_view name, const Averages& a, std::size_t support,
                         std::size_t unscored) {
  return fmt::format("{},{:.2f},{:.2f},{:.2f},{:.2f},{:.2f},{:.2f},{:.2f},{},{}\n", name,
                     as_percent(a.accuracy), as_percent(a.macro_precision),
                     as_percent(a.macro_recall), as_percent(a.macro_f1),
                     as_percent(a.weighted_precision), as_percent(a.weighted_recall),
                     as_percent(a.weighted_f1), support, unscored);
}

constexpr std::array<std::string_view, kNumClasses> kClassNames = {"-2", "-1", "0", "+1",
                                                                     "+2"};

}  // namespace

json to_json(const MetricsReport& report, const std::string& config_fingerprint) {
  json dims = json::object();
  for (const auto& d : report.dimensions) {
    json j = averages_json(d.averages);
    json classes = json::object();
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      const auto& s = d.classes[c];
      classes[std::string(kClassNames[c])] = {{"precision", as_percent(s.precision)},
                                              {"recall", as_percent(s.recall)},
                                              {"f1", as_percent(s.f1)},
                                              {"support", s.support}};
    }
    j["classes"] = std::move(classes);
    j["confusion"] = d.confusion.counts;
    dims[std::string(to_key(d.dimension))] = std::move(j);
  }
  return {{"config_fingerprint", config_fingerprint},
          {"conventions",
           "percentages, 2 decimals; macro averages over classes present in gold; "
           "weighted by gold support; per-class 0/0 = 0; unscored instances excluded"},
          {"scored", report.scored},
          {"unscored", report.unscored},
          {"pooled", averages_json(report.pooled)},
          {"dimensions", std::move(dims)}};
}

std::string metrics_csv(const MetricsReport& report, const std::string& config_fingerprint) {
  std::string out = "# config_fingerprint=" + config_fingerprint + "\n";
  out +=
      "dimension,accuracy,macro_precision,macro_recall,macro_f1,weighted_precision,"
      "weighted_recall,weighted_f1,scored,unscored\n";
  for (const auto& d : report.dimensions) {
    out += averages_row(to_key(d.dimension), d.averages, d.confusion.total(), report.unscored);
  }
  out += averages_row("pooled", report.pooled, report.scored, report.unscored);
  return out;
}

std::string confusion_csv(const ConfusionMatrix& cm, const std::string& config_fingerprint) {
  std::string out = "# config_fingerprint=" + config_fingerprint + "\n";
  out += "gold\\pred";
  for (auto n : kClassNames) out += fmt::format(",{}", n);
  out += "\n";
  for (std::size_t g = 0; g < kNumClasses; ++g) {
    out += kClassNames[g];
    for (auto c : cm.counts[g]) out += fmt::format(",{}", c);
    out += "\n";
  }
  return out;
}

std::string confusion_svg(const ConfusionMatrix& cm) {
  constexpr int cell = 60;
  constexpr int margin = 90;
  const int size = margin + cell * static_cast<int>(kNumClasses) + 20;
  const auto norm = cm.row_normalized();
  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n"
      "<text x=\"{2}\" y=\"20\" font-size=\"14\">{3}</text>\n",
      size, size + 20, margin, display_name(cm.dimension));
  for (std::size_t g = 0; g < kNumClasses; ++g) {
    const int y = 40 + static_cast<int>(g) * cell;
    svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", margin - 8,
                       y + cell / 2 + 4, kClassNames[g]);
    for (std::size_t p = 0; p < kNumClasses; ++p) {
      const int x = margin + static_cast<int>(p) * cell;
      const double v = norm[g][p];
      const int shade = static_cast<int>(std::lround(255.0 * (1.0 - v)));
      svg += fmt::format(
          "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"rgb({},{},255)\" "
          "stroke=\"#999\"/>\n<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" fill=\"{}\">"
          "{:.2f}</text>\n",
          x, y, cell, cell, shade, shade, x + cell / 2, y + cell / 2 + 4,
          v > 0.5 ? "white" : "black", v);
    }
  }
  const int bottom = 40 + static_cast<int>(kNumClasses) * cell;
  for (std::size_t p = 0; p < kNumClasses; ++p) {
    svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
                       margin + static_cast<int>(p) * cell + cell / 2, bottom + 16,
                       kClassNames[p]);
  }
  svg += fmt::format("<text x=\"{}\" y=\"{}\">predicted</text>\n", margin, bottom + 36);
  svg += "</svg>\n";
  return svg;
}

}  // namespace care
