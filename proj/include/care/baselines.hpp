#pragma once

// Prompt-based zero-shot / few-shot evaluators and the score-line parser.

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "care/dimension.hpp"
#include "care/jsonl_cache.hpp"
#include "care/prediction.hpp"
#include "care/teacher.hpp"

namespace care {

inline constexpr std::string_view kBaselineTemplateVersion = "baseline-v1";

enum class BaselineMode { ZeroShot, FewShot };

std::string_view to_key(BaselineMode m) noexcept;
BaselineMode baseline_mode_from_key(std::string_view key);

/// Key names used when rendering a score line.
enum class ScoreLineStyle {
  Full,         // Non-Judgmental: X, Warmth: X, ..., Active Listening: X, ...
  Short,        // Non-Judgmental: X, Warmth: X, Respect: X, Active: X, ...
  Abbreviated,  // NJ: X, W: X, RA: X, AL: X, RF: X, SA: X
};

struct ScoreLine {
  Labels labels{};
  std::array<bool, kNumDimensions> clamped{};
  std::string raw_text;

  bool any_clamped() const noexcept;
};

std::string render_score_line(const Labels& labels, ScoreLineStyle style = ScoreLineStyle::Full);

/// Scans a completion for the six labeled integers. Accepts full names,
/// short names ("Active", "Reflecting", ...) and abbreviations ("AL", ...),
/// case-insensitively, with ':' or '='. When a dimension appears more than
/// once the last occurrence wins. Out-of-range integers are clamped and
/// flagged. Throws ScoreParseFailure when any dimension is missing.
ScoreLine parse_score_line(const std::string& text);

struct Demonstration {
  std::string patient_text;  // optional
  std::string therapist_text;
  std::array<std::string, kNumDimensions> explanations{};
  Labels scores{};
};

/// The two worked examples used by default for few-shot prompting.
std::vector<Demonstration> default_demonstrations();

/// Throws EmptyTargetError for an empty therapist text.
std::string compose_zero_shot_prompt(const std::string& patient_text,
                                     const std::string& therapist_text);

/// Throws EmptyDemonstrationError without demonstrations, EmptyTargetError for
/// an empty therapist text.
std::string compose_few_shot_prompt(std::span<const Demonstration> demonstrations,
                                    const std::string& patient_text,
                                    const std::string& therapist_text);

struct BaselineInstance {
  std::string utterance_id;
  std::string patient_text;
  std::string therapist_text;
};

struct BaselineOptions {
  BaselineMode mode = BaselineMode::ZeroShot;
  std::vector<Demonstration> demonstrations = default_demonstrations();
  std::size_t parallelism = 4;
  RetryPolicy retry;
  DecodingParams decoding;
  std::string config_fingerprint;
  std::string corpus_fingerprint;
};

struct BaselineResult {
  std::vector<PredictionRecord> records;      // one per instance, input order
  std::vector<std::string> unscored_ids;      // parse or backend failures
  std::size_t client_calls = 0;               // completions requested (cache misses)
};

/// Scores every instance; never aborts on a parse or backend failure (those
/// records carry "scores": null). Completions are cached by prompt hash and
/// client id, so a rerun issues no new calls.
BaselineResult run_prompt_baseline(std::span<const BaselineInstance> instances,
                                   TeacherClient& client, JsonlCache& cache,
                                   const BaselineOptions& options = {});

}  // namespace care
