#pragma once

// Label-exclusive exemplar pools and exact cosine retrieval.

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "care/corpus.hpp"
#include "care/embedding.hpp"

namespace care {

enum class Polarity { Positive, Negative };

inline constexpr std::array<Polarity, 2> kAllPolarities = {Polarity::Positive,
                                                           Polarity::Negative};

std::string_view to_key(Polarity p) noexcept;
/// +2 for Positive, -2 for Negative.
int polarity_label(Polarity p) noexcept;

struct ExemplarPair {
  Dimension dimension = Dimension::NonJudgmental;
  Polarity polarity = Polarity::Positive;
  std::string patient_text;
  std::string therapist_text;
  std::string source_utterance_id;
  std::vector<float> embedding;  // unit L2 norm

  friend bool operator==(const ExemplarPair&, const ExemplarPair&) = default;
};

using ExemplarPool = std::vector<ExemplarPair>;

struct ScoredExemplar {
  const ExemplarPair* exemplar = nullptr;  // points into the searched pool
  double similarity = 0.0;
};

/// One pool per (dimension, polarity); immutable once built.
class ExemplarPools {
 public:
  ExemplarPools() = default;
  ExemplarPools(std::string provider_id, std::size_t embedding_dim)
      : provider_id_(std::move(provider_id)), dim_(embedding_dim) {}

  const std::string& provider_id() const noexcept { return provider_id_; }
  std::size_t embedding_dim() const noexcept { return dim_; }

  const ExemplarPool& pool(Dimension d, Polarity p) const {
    return pools_[slot(d, p)];
  }
  ExemplarPool& pool(Dimension d, Polarity p) { return pools_[slot(d, p)]; }

  std::size_t total_size() const noexcept;
  /// Source utterance ids across every pool.
  std::vector<std::string> source_ids() const;

  friend bool operator==(const ExemplarPools&, const ExemplarPools&) = default;

 private:
  static std::size_t slot(Dimension d, Polarity p) noexcept {
    return dimension_index(d) * 2 + (p == Polarity::Positive ? 0 : 1);
  }

  std::string provider_id_;
  std::size_t dim_ = 0;
  std::array<ExemplarPool, kNumDimensions * 2> pools_{};
};

struct QueryPair {
  std::string patient_text;  // empty when no patient turn precedes
  std::string therapist_text;
};

/// Text embedded for both pool members and queries:
/// "Patient: <p>\nTherapist: <t>", or "Patient:\nTherapist: <t>" when p is empty.
std::string serialize_pair(const QueryPair& pair);

/// Nearest preceding patient turn + the therapist turn at `position`.
QueryPair query_pair_at(const Session& session, std::size_t position);

struct PoolBuildOptions {
  std::size_t batch_size = 64;
  std::size_t parallelism = 4;  // concurrent provider batches
};

struct PoolBuildResult {
  ExemplarPools pools;
  std::vector<std::string> warnings;  // one per empty (dimension, polarity)
};

/// Builds pools from therapist utterances labeled exactly +2 / -2, each paired
/// with its nearest preceding patient turn. `train` must hold only training
/// sessions. Provider failures surface as ProviderError naming the exemplar.
PoolBuildResult build_pools(const Corpus& train, EmbeddingProvider& provider,
                            const PoolBuildOptions& options = {});

/// Exact full scan. Returns min(top_n, |pool|) entries ordered by similarity
/// descending, then source_utterance_id ascending.
std::vector<ScoredExemplar> retrieve(std::span<const float> query_embedding,
                                     const ExemplarPool& pool, std::size_t top_n);

/// Embeds the query with `provider` (which must match the pools' provider id)
/// and retrieves from pools.pool(d, p).
std::vector<ScoredExemplar> retrieve(const QueryPair& query,
                                     const ExemplarPools& pools, Dimension d,
                                     Polarity p, std::size_t top_n,
                                     EmbeddingProvider& provider);

/// Embeds and unit-normalizes one query pair.
std::vector<float> embed_query(const QueryPair& query, EmbeddingProvider& provider);

inline constexpr std::uint32_t kIndexFormatVersion = 1;

/// Binary container; embeddings are stored as raw IEEE-754 floats so a
/// round trip is bit-exact. `metadata` is an opaque JSON string.
void persist_index(const ExemplarPools& pools, const std::filesystem::path& path,
                   const std::string& metadata = "{}");
ExemplarPools load_index(const std::filesystem::path& path,
                         std::string* metadata = nullptr);

/// Violations of label exclusivity or train-only provenance; empty when clean.
std::vector<std::string> audit_pools(const ExemplarPools& pools,
                                     const Corpus& corpus,
                                     const SplitAssignment& split);

}  // namespace care
