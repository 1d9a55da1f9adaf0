#pragma once

// Deterministic synthetic corpus for offline runs: each therapist utterance
// carries one cue word per dimension, and the cue word alone determines the
// label. keyword_labels() is the label function.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "care/corpus.hpp"

namespace care {

struct SyntheticCorpus {
  std::vector<Utterance> utterances;
  std::vector<AnnotationRecord> annotations;
};

/// `sessions` sessions of `exchanges` patient/therapist pairs each; every
/// therapist turn is annotated.
SyntheticCorpus make_keyword_corpus(std::size_t sessions = 10, std::size_t exchanges = 6,
                                    std::uint64_t seed = 7);

/// Labels implied by the cue words in a therapist utterance; dimensions
/// without a cue word get 0.
Labels keyword_labels(const std::string& therapist_text);

/// Writes utterances.jsonl and annotations.jsonl into `dir`.
void write_synthetic_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir);

}  // namespace care
