#pragma once

#include <nlohmann/json.hpp>

#include "care/pipeline/config.hpp"

namespace care::pipeline {

enum class SweepStage { Train, Predict };

/// Expands the configured grid (k x polarity x teacher). The train stage
/// distills, trains, predicts the test split and scores every cell; the
/// predict stage reuses trained cells. Writes sweep/summary.csv and
/// sweep/summary.json.
nlohmann::json run_sweep(const PipelineConfig& config, SweepStage stage);

}  // namespace care::pipeline
