#pragma once

// Chain-of-thought rationale distillation: prompt composition, teacher calls
// with retries, and an on-disk rationale cache.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "care/exemplar_index.hpp"
#include "care/jsonl_cache.hpp"
#include "care/teacher.hpp"

namespace care {

inline constexpr std::string_view kRationaleTemplateVersion = "cot-explanation-v1";

enum class PolarityMode { Both, PositiveOnly, NegativeOnly };

std::string_view to_key(PolarityMode m) noexcept;
PolarityMode polarity_mode_from_key(std::string_view key);

struct RationalePrompt {
  std::string text;
  std::string hash;  // sha256 over template version + text
  bool no_exemplars = false;
  std::vector<std::string> exemplar_ids;  // rank order
};

/// Fills the counselor-persona explanation template. Exemplars are listed in
/// the given order. Throws EmptyTargetError for an empty therapist text.
RationalePrompt compose_rationale_prompt(std::span<const ScoredExemplar> exemplars,
                                         const QueryPair& target, Dimension dimension);

enum class RationaleStatus { Ok, FallbackEmpty };

struct Rationale {
  std::string utterance_id;
  Dimension dimension = Dimension::NonJudgmental;
  std::string text;  // empty iff status == FallbackEmpty
  std::string teacher_id;
  std::string prompt_hash;
  std::string created_at;  // ISO-8601 UTC
  RationaleStatus status = RationaleStatus::Ok;
  std::vector<std::string> exemplar_ids;

  friend bool operator==(const Rationale&, const Rationale&) = default;
};

nlohmann::json to_json(const Rationale& r);
Rationale rationale_from_json(const nlohmann::json& j);

/// Rationales keyed by (utterance_id, dimension, teacher_id, prompt_hash).
class RationaleCache {
 public:
  explicit RationaleCache(const std::filesystem::path& dir) : store_(dir) {}

  std::optional<Rationale> find(const std::string& utterance_id, Dimension d,
                                const std::string& teacher_id,
                                const std::string& prompt_hash) const;
  void store(const Rationale& r);
  std::size_t size() const { return store_.size(); }
  void compact() { store_.compact(); }

 private:
  JsonlCache store_;
};

/// Cache hit: returns the stored rationale without calling the teacher.
/// Miss: calls the teacher with retries; after exhausting them a
/// FallbackEmpty rationale is stored and returned.
Rationale generate_rationale(const RationalePrompt& prompt, Dimension dimension,
                             const std::string& utterance_id, TeacherClient& teacher,
                             RationaleCache& cache, const RetryPolicy& retry = {},
                             const DecodingParams& decoding = {});

struct DistillInstance {
  std::string utterance_id;
  QueryPair query;
};

struct DistillConfig {
  PolarityMode polarity = PolarityMode::Both;
  std::size_t top_n = 2;
  std::vector<Dimension> dimensions{kAllDimensions.begin(), kAllDimensions.end()};
  std::size_t parallelism = 4;
  RetryPolicy retry;
  DecodingParams decoding;
};

struct CoverageSummary {
  std::array<std::size_t, kNumDimensions> ok{};
  std::array<std::size_t, kNumDimensions> fallback{};
  std::size_t empty_exemplar_prompts = 0;

  std::size_t total() const;
};

nlohmann::json to_json(const CoverageSummary& s);

/// Ordered by (instance, dimension) as given.
struct RationaleSet {
  std::vector<Rationale> rationales;
  CoverageSummary summary;

  const Rationale* find(const std::string& utterance_id, Dimension d) const;
};

/// For every instance x dimension: retrieves top_n exemplars per configured
/// polarity (positives first, then negatives), composes one prompt and
/// generates or reuses one rationale. Never aborts on teacher failures.
RationaleSet batch_distill(std::span<const DistillInstance> instances,
                           const ExemplarPools& pools, EmbeddingProvider& provider,
                           TeacherClient& teacher, RationaleCache& cache,
                           const DistillConfig& config = {});

void write_rationales(const RationaleSet& set, std::ostream& out);
RationaleSet read_rationales(std::istream& in);

}  // namespace care
