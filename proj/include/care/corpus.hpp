#pragma once

// Counseling transcripts with ordinal annotations: ingestion, validation and
// deterministic session-wise splitting.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "care/dimension.hpp"

namespace care {

enum class Speaker { Patient, Therapist };

std::string_view to_key(Speaker s) noexcept;

struct Utterance {
  std::string session_id;
  int turn_index = 0;
  Speaker speaker = Speaker::Patient;
  std::string text;
  std::string utterance_id;

  friend bool operator==(const Utterance&, const Utterance&) = default;
};

struct AnnotationRecord {
  std::string utterance_id;
  Labels labels{};

  friend bool operator==(const AnnotationRecord&,
                         const AnnotationRecord&) = default;
};

struct Session {
  std::string id;
  std::vector<Utterance> turns;  // ordered by turn_index

  /// Position of the turn with the given turn_index, if present.
  std::optional<std::size_t> position_of(int turn_index) const;

  friend bool operator==(const Session&, const Session&) = default;
};

/// Immutable after construction; safe for concurrent reads.
class Corpus {
 public:
  Corpus() = default;

  /// Validates identifiers and annotation targets, orders turns.
  /// Throws DuplicateIdError or AnnotationTargetError.
  static Corpus build(std::vector<Utterance> utterances,
                      std::vector<AnnotationRecord> annotations);

  const std::vector<Session>& sessions() const noexcept { return sessions_; }
  const Session* find_session(const std::string& id) const;

  struct Location {
    std::size_t session;
    std::size_t position;
  };
  std::optional<Location> locate(const std::string& utterance_id) const;
  const Utterance* find_utterance(const std::string& utterance_id) const;

  /// Labels of an annotated therapist utterance, or nullptr.
  const Labels* labels(const std::string& utterance_id) const;
  const std::map<std::string, Labels>& annotations() const noexcept {
    return annotations_;
  }

  std::size_t num_utterances() const noexcept;
  std::size_t num_therapist_utterances() const noexcept;
  std::size_t num_annotated() const noexcept { return annotations_.size(); }

  std::vector<std::string> session_ids() const;

  /// Restriction to the given sessions, annotations included.
  Corpus subset(const std::set<std::string>& session_ids) const;

  /// Stable digest over the canonical serialization.
  std::string fingerprint() const;

  friend bool operator==(const Corpus& a, const Corpus& b) {
    return a.sessions_ == b.sessions_ && a.annotations_ == b.annotations_;
  }

 private:
  std::vector<Session> sessions_;  // sorted by session id
  std::map<std::string, Labels> annotations_;
  std::unordered_map<std::string, Location> index_;
};

// JSONL ingestion. Annotations are optional (nullptr / empty path).
Corpus read_corpus(std::istream& utterances, std::istream* annotations);
Corpus ingest_corpus(const std::filesystem::path& utterances,
                     const std::optional<std::filesystem::path>& annotations);

/// Writes the canonical JSONL form; read_corpus re-parses it to an equal Corpus.
void write_corpus(const Corpus& corpus, std::ostream& utterances,
                  std::ostream& annotations);

nlohmann::json to_json(const Utterance& u);
nlohmann::json to_json(const AnnotationRecord& a);
nlohmann::json labels_to_json(const Labels& labels);
/// Throws ParseError on missing keys or out-of-range values.
Labels labels_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Splits

enum class Split { Train, Validation, Test };

std::string_view to_key(Split s) noexcept;

struct SplitRatios {
  double train = 0.7;
  double validation = 0.1;
  double test = 0.2;
};

struct SplitAssignment {
  std::set<std::string> train;
  std::set<std::string> validation;
  std::set<std::string> test;
  std::uint64_t seed = 42;

  std::optional<Split> split_of(const std::string& session_id) const;
  const std::set<std::string>& sessions(Split s) const;
  std::set<std::string>& sessions(Split s);

  friend bool operator==(const SplitAssignment&,
                         const SplitAssignment&) = default;
};

inline constexpr std::uint64_t kDefaultSeed = 42;

/// Seeded Fisher-Yates shuffle of the sorted session ids, cut at
/// floor(train * S) and floor((train + validation) * S).
SplitAssignment split_sessions(const Corpus& corpus, SplitRatios ratios,
                               std::uint64_t seed = kDefaultSeed);

/// Official split file: {"train": [...], "validation": [...], "test": [...]}.
/// Every corpus session must appear exactly once.
SplitAssignment read_split_file(const std::filesystem::path& path,
                                const Corpus& corpus);
nlohmann::json to_json(const SplitAssignment& split);
SplitAssignment split_from_json(const nlohmann::json& j, const Corpus& corpus);

/// Annotated therapist utterance ids belonging to sessions of one split.
std::vector<std::string> annotated_ids(const Corpus& corpus,
                                       const std::set<std::string>& sessions);

// ---------------------------------------------------------------------------
// Validation report

struct SessionStats {
  std::string session_id;
  std::size_t turns = 0;
  std::size_t patient_turns = 0;
  std::size_t therapist_turns = 0;
  std::size_t annotated = 0;
};

struct ValidationReport {
  std::size_t sessions = 0;
  std::size_t utterances = 0;
  std::size_t therapist_utterances = 0;
  std::size_t annotated = 0;
  /// counts[dimension][class]; class order -2..+2 (SN, MN, Neu, MP, SP).
  std::array<std::array<std::size_t, kNumClasses>, kNumDimensions> counts{};
  std::vector<SessionStats> session_stats;
  std::vector<std::string> warnings;
};

ValidationReport validate_corpus(const Corpus& corpus);
nlohmann::json to_json(const ValidationReport& report);
/// Label distribution table: one row per dimension.
std::string to_csv(const ValidationReport& report);

}  // namespace care
