#include "care/context.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "care/errors.hpp"

namespace care {

std::vector<ContextTurn> ContextWindow::history() const {
  if (turns.empty()) return {};
  return {turns.begin(), turns.end() - 1};
}

std::optional<std::size_t> preceding_patient(const Session& session,
                                             std::size_t position) {
  for (std::size_t i = position; i-- > 0;) {
    if (session.turns[i].speaker == Speaker::Patient) return i;
  }
  return std::nullopt;
}

ContextWindow build_context_window(const Session& session, int target_turn_index,
                                   int k, std::size_t max_turns) {
  if (k < 0) throw ConfigError("context size k must be non-negative");
  const auto pos = session.position_of(target_turn_index);
  if (!pos) {
    throw TurnNotFoundError(fmt::format("turn {} not found in session '{}'",
                                        target_turn_index, session.id));
  }
  const Utterance& target = session.turns[*pos];
  if (target.speaker != Speaker::Therapist) {
    throw NotTherapistTurnError(fmt::format(
        "turn {} in session '{}' is a patient turn", target_turn_index, session.id));
  }

  auto to_turn = [](const Utterance& u) {
    return ContextTurn{u.speaker, u.text, u.turn_index};
  };

  std::vector<ContextTurn> reversed;
  reversed.push_back(to_turn(target));
  std::size_t cursor = *pos;
  if (auto patient = preceding_patient(session, *pos)) {
    reversed.push_back(to_turn(session.turns[*patient]));
    cursor = *patient;
  }
  for (int taken = 0; taken < k && cursor > 0; ++taken) {
    --cursor;
    reversed.push_back(to_turn(session.turns[cursor]));
  }
  if (max_turns > 0 && reversed.size() > max_turns) reversed.resize(max_turns);

  ContextWindow w;
  w.target_utterance_id = target.utterance_id;
  w.k = k;
  w.turns.assign(reversed.rbegin(), reversed.rend());
  return w;
}

std::string speaker_prefix(Speaker s) {
  return s == Speaker::Patient ? "Patient:" : "Therapist:";
}

std::string render_window(const ContextWindow& window) {
  std::string out;
  for (std::size_t i = 0; i < window.turns.size(); ++i) {
    if (i > 0) out += '\n';
    out += speaker_prefix(window.turns[i].speaker);
    out += ' ';
    out += window.turns[i].text;
  }
  return out;
}

}  // namespace care
