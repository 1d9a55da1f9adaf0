#include "care/synthetic.hpp"

#include <array>
#include <fstream>
#include <sstream>

#include "care/embedding.hpp"
#include "care/errors.hpp"
#include "care/random.hpp"

namespace care {

namespace {

// kCues[dimension][class] with class order -2..+2.
constexpr std::array<std::array<std::string_view, kNumClasses>, kNumDimensions> kCues = {{
    {"blame", "doubt", "noted", "accept", "embrace"},
    {"dismiss", "shrug", "fine", "glad", "cheer"},
    {"insist", "steer", "suggest", "choose", "decide"},
    {"interrupt", "skim", "hear", "follow", "attend"},
    {"ignore", "deflect", "mention", "sense", "mirror"},
    {"joke", "tangent", "routine", "timely", "fitting"},
}};

constexpr std::array<std::string_view, 12> kFiller = {
    "today", "really", "maybe", "week", "then", "about",
    "that", "still", "again", "here", "lately", "things"};

constexpr std::array<std::string_view, 10> kPatientLines = {
    "I have not been sleeping well",
    "Work has been stressful lately",
    "My family keeps asking about it",
    "I tried the exercise you gave me",
    "Sometimes I feel stuck",
    "I argued with my sister again",
    "It was an okay week I guess",
    "I do not know where to start",
    "I keep worrying about money",
    "I felt calmer after our last talk",
};

}  // namespace

Labels keyword_labels(const std::string& therapist_text) {
  Labels labels{};
  const auto words = word_tokens(therapist_text);
  for (std::size_t d = 0; d < kNumDimensions; ++d) {
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      for (const auto& w : words) {
        if (w == kCues[d][c]) labels[d] = class_to_label(c);
      }
    }
  }
  return labels;
}

SyntheticCorpus make_keyword_corpus(std::size_t sessions, std::size_t exchanges,
                                    std::uint64_t seed) {
  Rng rng(seed);
  SyntheticCorpus out;
  for (std::size_t s = 0; s < sessions; ++s) {
    const std::string sid = "S" + std::to_string(100 + s);
    int turn = 0;
    for (std::size_t e = 0; e < exchanges; ++e) {
      Utterance p;
      p.session_id = sid;
      p.turn_index = turn;
      p.speaker = Speaker::Patient;
      p.text = std::string(kPatientLines[rng.below(kPatientLines.size())]);
      p.utterance_id = sid + "_" + std::to_string(turn++);
      out.utterances.push_back(p);

      Labels labels{};
      std::ostringstream text;
      text << kFiller[rng.below(kFiller.size())];
      for (std::size_t d = 0; d < kNumDimensions; ++d) {
        const auto cls = rng.below(kNumClasses);
        labels[d] = class_to_label(cls);
        text << ' ' << kCues[d][cls];
        if (rng.below(2) == 0) text << ' ' << kFiller[rng.below(kFiller.size())];
      }
      Utterance t;
      t.session_id = sid;
      t.turn_index = turn;
      t.speaker = Speaker::Therapist;
      t.text = text.str();
      t.utterance_id = sid + "_" + std::to_string(turn++);
      out.utterances.push_back(t);
      out.annotations.push_back({t.utterance_id, labels});
    }
  }
  return out;
}

void write_synthetic_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const Corpus c = Corpus::build(corpus.utterances, corpus.annotations);
  std::ofstream utt(dir / "utterances.jsonl");
  std::ofstream ann(dir / "annotations.jsonl");
  if (!utt || !ann) throw IOError("cannot write synthetic corpus to " + dir.string());
  write_corpus(c, utt, ann);
}

}  // namespace care
