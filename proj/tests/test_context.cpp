#include <doctest.h>

#include <random>

#include "care/context.hpp"
#include "care/errors.hpp"
#include "fixtures.hpp"

using namespace care;
using fixture::utt;

namespace {

Session alternating(std::size_t n) {
  Session s{"s", {}};
  for (std::size_t i = 0; i < n; ++i) {
    s.turns.push_back(utt("s", static_cast<int>(i),
                          i % 2 == 0 ? Speaker::Patient : Speaker::Therapist,
                          (i % 2 == 0 ? "P" : "T") + std::to_string(i)));
  }
  return s;
}

std::vector<int> indices(const ContextWindow& w) {
  std::vector<int> out;
  for (const auto& t : w.turns) out.push_back(t.turn_index);
  return out;
}

}  // namespace

TEST_CASE("session-start truncation") {
  const auto w = build_context_window(alternating(2), 1, 2);
  CHECK(indices(w) == std::vector<int>{0, 1});
  CHECK(w.target_utterance_id == "s_1");
  CHECK(w.k == 2);
}

TEST_CASE("k earlier turns before the current exchange") {
  const auto s = alternating(6);
  CHECK(indices(build_context_window(s, 5, 2)) == std::vector<int>{2, 3, 4, 5});
  CHECK(indices(build_context_window(s, 5, 3)) == std::vector<int>{1, 2, 3, 4, 5});
  CHECK(indices(build_context_window(s, 3, 1)) == std::vector<int>{1, 2, 3});
}

TEST_CASE("k = 0 keeps the nearest preceding patient turn") {
  const auto s = alternating(6);
  CHECK(indices(build_context_window(s, 5, 0)) == std::vector<int>{4, 5});

  Session therapist_first{"t", {utt("t", 0, Speaker::Therapist, "opening")}};
  CHECK(indices(build_context_window(therapist_first, 0, 0)) == std::vector<int>{0});
}

TEST_CASE("irregular alternation: the exchange skips intervening therapist turns") {
  Session s{"x",
            {utt("x", 0, Speaker::Patient, "a"), utt("x", 1, Speaker::Therapist, "b"),
             utt("x", 2, Speaker::Patient, "c"), utt("x", 3, Speaker::Therapist, "d"),
             utt("x", 4, Speaker::Therapist, "e")}};
  // nearest patient is turn 2; turn 3 is between and not part of the exchange
  CHECK(indices(build_context_window(s, 4, 0)) == std::vector<int>{2, 4});
  CHECK(indices(build_context_window(s, 4, 2)) == std::vector<int>{0, 1, 2, 4});
}

TEST_CASE("six-turn cap") {
  const auto s = alternating(20);
  const auto w = build_context_window(s, 19, 10);
  CHECK(w.turns.size() == kSlidingWindowTurns);
  CHECK(w.turns.back().turn_index == 19);
}

TEST_CASE("errors") {
  const auto s = alternating(4);
  CHECK_THROWS_AS(build_context_window(s, 2, 1), NotTherapistTurnError);
  CHECK_THROWS_AS(build_context_window(s, 9, 1), TurnNotFoundError);
}

TEST_CASE("render") {
  ContextWindow w{"id", {{Speaker::Patient, "hi", 0}, {Speaker::Therapist, "hello", 1}}, 0};
  CHECK(render_window(w) == "Patient: hi\nTherapist: hello");
  CHECK(render_window(w) == render_window(w));

  Session only{"o", {utt("o", 0, Speaker::Therapist, "welcome back")}};
  CHECK(render_window(build_context_window(only, 0, 3)) == "Therapist: welcome back");
}

TEST_CASE("window properties over random sessions") {
  std::mt19937_64 gen(21);
  for (int rep = 0; rep < 200; ++rep) {
    const auto corpus = fixture::random_corpus(gen, 3, 12);
    for (const auto& session : corpus.sessions()) {
      for (const auto& target : session.turns) {
        if (target.speaker != Speaker::Therapist) continue;
        ContextWindow prev;
        for (int k = 0; k <= 5; ++k) {
          const auto w = build_context_window(session, target.turn_index, k);
          CHECK(w.turns.back().turn_index == target.turn_index);
          CHECK(w.turns.size() <= static_cast<std::size_t>(2 * (k + 1)));
          CHECK(w.turns.size() <= kSlidingWindowTurns);
          for (const auto& t : w.turns) {
            CHECK(t.turn_index <= target.turn_index);
            CHECK(session.position_of(t.turn_index).has_value());
          }
          if (k > 0) {
            // window(k-1) is a suffix of window(k)
            REQUIRE(prev.turns.size() <= w.turns.size());
            CHECK(std::equal(prev.turns.rbegin(), prev.turns.rend(), w.turns.rbegin()));
          }
          prev = w;
        }
      }
    }
  }
}
