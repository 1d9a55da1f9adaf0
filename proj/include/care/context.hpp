#pragma once

// Local conversational context for a therapist utterance.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "care/corpus.hpp"

namespace care {

inline constexpr int kCareContextK = 3;
inline constexpr int kBaselineContextK = 2;
/// Hard cap on the number of serialized turns in any window.
inline constexpr std::size_t kSlidingWindowTurns = 6;

struct ContextTurn {
  Speaker speaker = Speaker::Patient;
  std::string text;
  int turn_index = 0;

  friend bool operator==(const ContextTurn&, const ContextTurn&) = default;
};

/// The target therapist turn is always last.
struct ContextWindow {
  std::string target_utterance_id;
  std::vector<ContextTurn> turns;
  int k = 0;

  const ContextTurn& target() const { return turns.back(); }
  /// Every turn except the target, oldest first.
  std::vector<ContextTurn> history() const;

  friend bool operator==(const ContextWindow&, const ContextWindow&) = default;
};

/// Position of the nearest patient turn before `position`, if any.
std::optional<std::size_t> preceding_patient(const Session& session,
                                             std::size_t position);

/// Window = [k earlier turns] + [nearest preceding patient turn] + [target].
///
/// The current exchange is the target plus the nearest preceding patient turn
/// in the session (therapist turns between the two are not part of it). The k
/// earlier turns are taken walking backward from just before that patient
/// turn, one per turn regardless of speaker. Without a preceding patient turn
/// the k earlier turns are taken directly before the target. Truncation at
/// session start is silent, and at most `max_turns` trailing turns are kept.
///
/// Throws TurnNotFoundError / NotTherapistTurnError.
ContextWindow build_context_window(const Session& session, int target_turn_index,
                                   int k,
                                   std::size_t max_turns = kSlidingWindowTurns);

/// "Patient: <text>\nTherapist: <text>" with the target last, no trailing
/// newline.
std::string render_window(const ContextWindow& window);

std::string speaker_prefix(Speaker s);

}  // namespace care
