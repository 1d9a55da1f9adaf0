#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "care/metrics.hpp"
#include "care/pipeline/artifacts.hpp"

namespace care::pipeline {

/// Refuses (FingerprintMismatchError) when records disagree with each other
/// or with `corpus_fingerprint` about the corpus they were produced from.
void check_corpus_fingerprints(const std::vector<std::vector<PredictionRecord>>& files,
                               const std::vector<std::string>& names,
                               const std::string& corpus_fingerprint);

/// Writes metrics.json, metrics.csv and one confusion CSV (plus an optional
/// SVG heatmap) per dimension into `dir`. Returns the metrics JSON.
nlohmann::json write_metrics_bundle(const Workspace& ws, const std::filesystem::path& dir,
                                    const std::vector<PredictionRecord>& records,
                                    const std::map<std::string, Labels>& gold,
                                    const std::vector<PredictionRecord>* reference,
                                    bool heatmaps);

}  // namespace care::pipeline
