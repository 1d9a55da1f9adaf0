#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "care/corpus.hpp"
#include "care/errors.hpp"
#include "fixtures.hpp"

using namespace care;
using fixture::utt;

namespace {

const char* kFourTurns =
    R"({"session_id":"s1","turn_index":0,"speaker":"patient","text":"I feel stuck.","utterance_id":"u0"}
{"session_id":"s1","turn_index":1,"speaker":"therapist","text":"Tell me more.","utterance_id":"u1"}
{"session_id":"s1","turn_index":2,"speaker":"patient","text":"Work is hard.","utterance_id":"u2"}
{"session_id":"s1","turn_index":3,"speaker":"therapist","text":"That sounds heavy.","utterance_id":"u3"}
)";

const char* kTwoAnnotations =
    R"({"utterance_id":"u1","labels":{"non_judgmental":1,"warmth_encouragement":0,"respect_autonomy":0,"active_listening":2,"reflecting_feelings":0,"situational_appropriateness":1}}
{"utterance_id":"u3","labels":{"non_judgmental":2,"warmth_encouragement":2,"respect_autonomy":1,"active_listening":1,"reflecting_feelings":2,"situational_appropriateness":2}}
)";

Corpus parse(const std::string& utts, const std::string& anns) {
  std::istringstream u(utts), a(anns);
  return read_corpus(u, &a);
}

Corpus n_sessions(std::size_t n) {
  std::vector<Utterance> utts;
  for (std::size_t s = 0; s < n; ++s) {
    const auto sid = "sess" + std::to_string(s);
    utts.push_back(utt(sid, 0, Speaker::Patient, "hello"));
    utts.push_back(utt(sid, 1, Speaker::Therapist, "hi"));
  }
  return Corpus::build(std::move(utts), {});
}

}  // namespace

TEST_CASE("empty input gives an empty corpus") {
  const auto c = parse("", "");
  CHECK(c.sessions().empty());
  CHECK(c.num_utterances() == 0);
  CHECK(c.num_annotated() == 0);
}

TEST_CASE("minimal well-formed session") {
  const auto c = parse(kFourTurns, kTwoAnnotations);
  REQUIRE(c.sessions().size() == 1);
  CHECK(c.num_utterances() == 4);
  CHECK(c.num_therapist_utterances() == 2);
  CHECK(c.num_annotated() == 2);
  REQUIRE(c.labels("u3") != nullptr);
  CHECK((*c.labels("u3"))[dimension_index(Dimension::RespectAutonomy)] == 1);
  CHECK(c.labels("u0") == nullptr);
}

TEST_CASE("turns are ordered by turn_index regardless of file order") {
  std::vector<Utterance> utts = {utt("a", 5, Speaker::Therapist, "later"),
                                 utt("a", 2, Speaker::Patient, "earlier")};
  const auto c = Corpus::build(utts, {});
  REQUIRE(c.sessions()[0].turns.size() == 2);
  CHECK(c.sessions()[0].turns[0].turn_index == 2);
  CHECK(c.sessions()[0].turns[1].turn_index == 5);
}

TEST_CASE("parse errors carry the line number") {
  const std::string bad = std::string(kFourTurns) + "{not json}\n";
  try {
    parse(bad, "");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("utterances:5") != std::string::npos);
  }

  const std::string wrong_speaker =
      R"({"session_id":"s","turn_index":0,"speaker":"client","text":"x","utterance_id":"a"})";
  CHECK_THROWS_AS(parse(wrong_speaker, ""), ParseError);

  const std::string out_of_range =
      R"({"utterance_id":"u1","labels":{"non_judgmental":3,"warmth_encouragement":0,"respect_autonomy":0,"active_listening":2,"reflecting_feelings":0,"situational_appropriateness":1}})";
  try {
    parse(kFourTurns, out_of_range);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("annotations:1") != std::string::npos);
  }

  const std::string five_labels =
      R"({"utterance_id":"u1","labels":{"non_judgmental":1,"warmth_encouragement":0,"respect_autonomy":0,"active_listening":2,"reflecting_feelings":0}})";
  CHECK_THROWS_AS(parse(kFourTurns, five_labels), ParseError);
}

TEST_CASE("identifier and annotation target errors") {
  std::vector<Utterance> dup = {utt("a", 0, Speaker::Patient, "x"),
                                utt("a", 1, Speaker::Therapist, "y")};
  dup[1].utterance_id = dup[0].utterance_id;
  CHECK_THROWS_AS(Corpus::build(dup, {}), DuplicateIdError);

  std::vector<Utterance> same_turn = {utt("a", 0, Speaker::Patient, "x"),
                                      utt("a", 0, Speaker::Therapist, "y")};
  same_turn[1].utterance_id = "other";
  CHECK_THROWS_AS(Corpus::build(same_turn, {}), DuplicateIdError);

  std::vector<Utterance> ok = {utt("a", 0, Speaker::Patient, "x"),
                               utt("a", 1, Speaker::Therapist, "y")};
  CHECK_THROWS_AS(Corpus::build(ok, {{"a_0", fixture::uniform_labels(0)}}),
                  AnnotationTargetError);
  CHECK_THROWS_AS(Corpus::build(ok, {{"missing", fixture::uniform_labels(0)}}),
                  AnnotationTargetError);
}

TEST_CASE("serialization round-trips to an equal corpus") {
  std::mt19937_64 gen(11);
  for (int rep = 0; rep < 20; ++rep) {
    const auto c = fixture::random_corpus(gen, 1 + gen() % 6);
    std::ostringstream u, a;
    write_corpus(c, u, a);
    CHECK(parse(u.str(), a.str()) == c);
  }
}

TEST_CASE("ingest from files") {
  fixture::TempDir dir;
  std::ofstream(dir / "u.jsonl") << kFourTurns;
  std::ofstream(dir / "a.jsonl") << kTwoAnnotations;
  const auto c = ingest_corpus(dir / "u.jsonl", dir / "a.jsonl");
  CHECK(c.num_annotated() == 2);
  CHECK(ingest_corpus(dir / "u.jsonl", std::nullopt).num_annotated() == 0);
  CHECK_THROWS_AS(ingest_corpus(dir / "missing.jsonl", std::nullopt), IOError);
}

TEST_CASE("ten sessions split 7/1/2 deterministically") {
  const auto c = n_sessions(10);
  for (std::uint64_t seed : {0ULL, 1ULL, 42ULL, 987654321ULL}) {
    const auto s = split_sessions(c, {}, seed);
    CHECK(s.train.size() == 7);
    CHECK(s.validation.size() == 1);
    CHECK(s.test.size() == 2);
    CHECK(split_sessions(c, {}, seed) == s);
  }
  CHECK(split_sessions(c, {}, 1) != split_sessions(c, {}, 2));
}

TEST_CASE("split is a partition over random corpora") {
  std::mt19937_64 gen(5);
  for (int rep = 0; rep < 100; ++rep) {
    const auto c = fixture::random_corpus(gen, 3 + gen() % 30, 3);
    const auto s = split_sessions(c, {}, gen());
    std::set<std::string> all;
    std::size_t total = 0;
    for (auto sp : {Split::Train, Split::Validation, Split::Test}) {
      total += s.sessions(sp).size();
      all.insert(s.sessions(sp).begin(), s.sessions(sp).end());
    }
    const auto ids = c.session_ids();
    CHECK(total == ids.size());
    CHECK(all == std::set<std::string>(ids.begin(), ids.end()));
  }
}

TEST_CASE("split preconditions") {
  CHECK_THROWS_AS(split_sessions(n_sessions(2), {}), TooFewSessionsError);
  CHECK_THROWS_AS(split_sessions(n_sessions(5), {0.5, 0.5, 0.5}), ConfigError);
}

TEST_CASE("official split file overrides ratios") {
  fixture::TempDir dir;
  const auto c = n_sessions(4);
  std::ofstream(dir / "split.json")
      << R"({"train":["sess0","sess1"],"validation":["sess2"],"test":["sess3"]})";
  const auto s = read_split_file(dir / "split.json", c);
  CHECK(s.train == std::set<std::string>{"sess0", "sess1"});
  CHECK(s.split_of("sess3") == Split::Test);

  std::ofstream(dir / "partial.json") << R"({"train":["sess0"],"validation":[],"test":[]})";
  CHECK_THROWS_AS(read_split_file(dir / "partial.json", c), ParseError);
  std::ofstream(dir / "twice.json")
      << R"({"train":["sess0","sess1","sess2"],"validation":["sess3"],"test":["sess0"]})";
  CHECK_THROWS_AS(read_split_file(dir / "twice.json", c), ParseError);
}

TEST_CASE("validation tallies") {
  SUBCASE("uniform neutral labels") {
    std::vector<Utterance> utts;
    std::vector<AnnotationRecord> anns;
    for (int i = 0; i < 3; ++i) {
      utts.push_back(utt("v", 2 * i, Speaker::Patient, "p"));
      utts.push_back(utt("v", 2 * i + 1, Speaker::Therapist, "t"));
      anns.push_back({utts.back().utterance_id, fixture::uniform_labels(0)});
    }
    const auto r = validate_corpus(Corpus::build(utts, anns));
    for (std::size_t d = 0; d < kNumDimensions; ++d) {
      CHECK(r.counts[d] == std::array<std::size_t, 5>{0, 0, 3, 0, 0});
    }
    CHECK(r.warnings.empty());
  }
  SUBCASE("each label once on one dimension") {
    std::vector<Utterance> utts;
    std::vector<AnnotationRecord> anns;
    for (int v = -2; v <= 2; ++v) {
      utts.push_back(utt("w", v + 2, Speaker::Therapist, "t"));
      Labels l = fixture::uniform_labels(0);
      l[0] = v;
      anns.push_back({utts.back().utterance_id, l});
    }
    const auto r = validate_corpus(Corpus::build(utts, anns));
    CHECK(r.counts[0] == std::array<std::size_t, 5>{1, 1, 1, 1, 1});
    CHECK(r.counts[1] == std::array<std::size_t, 5>{0, 0, 5, 0, 0});
    // starts with a therapist turn, then four consecutive therapist turns
    CHECK(r.warnings.size() == 5);
    const auto csv = to_csv(r);
    CHECK(csv.find("non_judgmental,1,1,1,1,1") != std::string::npos);
  }
  SUBCASE("counts sum to the annotated total on random corpora") {
    std::mt19937_64 gen(9);
    for (int rep = 0; rep < 20; ++rep) {
      const auto c = fixture::random_corpus(gen, 1 + gen() % 8);
      const auto r = validate_corpus(c);
      for (const auto& row : r.counts) {
        std::size_t sum = 0;
        for (auto x : row) sum += x;
        CHECK(sum == c.num_annotated());
      }
      CHECK(r.annotated == c.num_annotated());
    }
  }
}
