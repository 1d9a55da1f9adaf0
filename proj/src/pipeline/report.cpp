#include "care/pipeline/report.hpp"

#include <cmath>
#include <set>

#include <spdlog/spdlog.h>

#include "care/errors.hpp"

namespace care::pipeline {

using nlohmann::json;

void check_corpus_fingerprints(const std::vector<std::vector<PredictionRecord>>& files,
                               const std::vector<std::string>& names,
                               const std::string& corpus_fingerprint) {
  for (std::size_t i = 0; i < files.size(); ++i) {
    std::set<std::string> seen;
    for (const auto& r : files[i]) seen.insert(r.corpus_fingerprint);
    for (const auto& fp : seen) {
      if (fp.empty()) {
        spdlog::warn("{} has records without a corpus fingerprint", names[i]);
        continue;
      }
      if (fp != corpus_fingerprint) {
        throw FingerprintMismatchError(names[i] + " was produced from corpus " + fp +
                                       ", the current corpus is " + corpus_fingerprint);
      }
    }
  }
}

json write_metrics_bundle(const Workspace& ws, const std::filesystem::path& dir,
                          const std::vector<PredictionRecord>& records,
                          const std::map<std::string, Labels>& gold,
                          const std::vector<PredictionRecord>* reference, bool heatmaps) {
  const MetricsReport report = classification_metrics(records, gold);
  json j = to_json(report, ws.config_fingerprint());

  // Chance-corrected agreement between the predictions and gold per dimension.
  std::array<std::vector<int>, kNumDimensions> pred_labels, gold_labels;
  for (const auto& r : records) {
    const auto it = gold.find(r.utterance_id);
    if (!r.scored() || it == gold.end()) continue;
    for (std::size_t d = 0; d < kNumDimensions; ++d) {
      pred_labels[d].push_back((*r.scores)[d].argmax);
      gold_labels[d].push_back(it->second[d]);
    }
  }
  json kappa = json::object();
  for (std::size_t d = 0; d < kNumDimensions; ++d) {
    const double k = cohen_kappa(pred_labels[d], gold_labels[d]);
    kappa[std::string(to_key(kAllDimensions[d]))] = std::round(k * 10000.0) / 10000.0;
  }
  j["kappa_vs_gold"] = kappa;

  if (reference != nullptr) {
    const auto rates = agreement_rate(records, *reference);
    json agree = json::object();
    for (std::size_t d = 0; d < kNumDimensions; ++d) {
      agree[std::string(to_key(kAllDimensions[d]))] = std::round(rates[d] * 100.0) / 100.0;
    }
    j["agreement_with_reference"] = agree;
  }

  ws.write(dir / "metrics.json", j.dump(2) + "\n", "report");
  ws.write(dir / "metrics.csv", metrics_csv(report, ws.config_fingerprint()), "report");
  for (const auto& dm : report.dimensions) {
    const std::string key(to_key(dm.dimension));
    ws.write(dir / ("confusion_" + key + ".csv"),
             confusion_csv(dm.confusion, ws.config_fingerprint()), "report");
    if (heatmaps) {
      ws.write(dir / ("confusion_" + key + ".svg"),
               "<!-- config_fingerprint=" + ws.config_fingerprint() + " -->\n" +
                   confusion_svg(dm.confusion),
               "report");
    }
  }
  return j;
}

}  // namespace care::pipeline
