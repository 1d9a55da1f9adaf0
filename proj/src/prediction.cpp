#include "care/prediction.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "care/errors.hpp"

namespace care {

using nlohmann::json;

ClassProbs softmax(const ClassLogits& logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  ClassProbs p{};
  double sum = 0.0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    p[c] = std::exp(logits[c] - mx);
    sum += p[c];
  }
  for (double& v : p) v /= sum;
  return p;
}

DimensionScore score_from_probs(const ClassProbs& probs) {
  DimensionScore s;
  s.probs = probs;
  std::size_t best = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    s.expected += probs[c] * class_to_label(c);
    if (probs[c] > probs[best]) best = c;
  }
  s.argmax = class_to_label(best);
  return s;
}

DimensionScore score_from_logits(const ClassLogits& logits) {
  return score_from_probs(softmax(logits));
}

DimensionScores scores_from_logits(const Logits& logits) {
  DimensionScores out{};
  for (std::size_t d = 0; d < kNumDimensions; ++d) out[d] = score_from_logits(logits[d]);
  return out;
}

DimensionScores degenerate_scores(const Labels& labels) {
  DimensionScores out{};
  for (std::size_t d = 0; d < kNumDimensions; ++d) {
    ClassProbs p{};
    p[label_to_class(labels[d])] = 1.0;
    out[d] = score_from_probs(p);
  }
  return out;
}

Labels argmax_labels(const DimensionScores& scores) {
  Labels out{};
  for (std::size_t d = 0; d < kNumDimensions; ++d) out[d] = scores[d].argmax;
  return out;
}

json to_json(const PredictionRecord& r) {
  json j = {{"utterance_id", r.utterance_id}};
  if (r.scores) {
    json scores = json::object();
    for (Dimension d : kAllDimensions) {
      const auto& s = (*r.scores)[dimension_index(d)];
      scores[std::string(to_key(d))] = {
          {"probs", s.probs}, {"expected", s.expected}, {"argmax", s.argmax}};
    }
    j["scores"] = std::move(scores);
  } else {
    j["scores"] = nullptr;
  }
  j["checkpoint"] = r.checkpoint;
  j["config_fingerprint"] = r.config_fingerprint;
  j["corpus_fingerprint"] = r.corpus_fingerprint;
  for (const auto& [k, v] : r.extra.items()) j[k] = v;
  return j;
}

PredictionRecord prediction_from_json(const json& j) {
  static const std::array<std::string, 5> kCore = {
      "utterance_id", "scores", "checkpoint", "config_fingerprint",
      "corpus_fingerprint"};
  PredictionRecord r;
  try {
    r.utterance_id = j.at("utterance_id").get<std::string>();
    r.checkpoint = j.value("checkpoint", "");
    r.config_fingerprint = j.value("config_fingerprint", "");
    r.corpus_fingerprint = j.value("corpus_fingerprint", "");
    if (j.contains("scores") && !j["scores"].is_null()) {
      DimensionScores scores{};
      for (Dimension d : kAllDimensions) {
        const auto& s = j["scores"].at(std::string(to_key(d)));
        auto& out = scores[dimension_index(d)];
        out.probs = s.at("probs").get<ClassProbs>();
        out.expected = s.at("expected").get<double>();
        out.argmax = s.at("argmax").get<int>();
        if (!is_valid_label(out.argmax)) {
          throw ParseError("prediction argmax outside [-2, +2]");
        }
      }
      r.scores = scores;
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed prediction record: ") + e.what());
  }
  for (const auto& [k, v] : j.items()) {
    if (std::find(kCore.begin(), kCore.end(), k) == kCore.end()) r.extra[k] = v;
  }
  return r;
}

void write_predictions(std::span<const PredictionRecord> records, std::ostream& out) {
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

std::vector<PredictionRecord> read_predictions(std::istream& in) {
  std::vector<PredictionRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(prediction_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw ParseError("predictions:" + std::to_string(line_no) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError("predictions:" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace care
