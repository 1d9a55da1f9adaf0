#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "care/distill.hpp"
#include "care/errors.hpp"
#include "care/synthetic.hpp"
#include "fixtures.hpp"

using namespace care;

namespace {

RetryPolicy instant_retries(std::vector<std::chrono::milliseconds>* slept = nullptr) {
  RetryPolicy r;
  r.sleep = [slept](std::chrono::milliseconds d) {
    if (slept) slept->push_back(d);
  };
  return r;
}

struct Fixture {
  Corpus corpus;
  HashingEmbeddingProvider provider{64};
  ExemplarPools pools;

  Fixture() {
    auto synth = make_keyword_corpus(4, 6);
    corpus = Corpus::build(synth.utterances, synth.annotations);
    pools = build_pools(corpus, provider).pools;
  }

  std::vector<DistillInstance> instances(std::size_t n) const {
    std::vector<DistillInstance> out;
    for (const auto& s : corpus.sessions()) {
      for (std::size_t i = 0; i < s.turns.size() && out.size() < n; ++i) {
        if (s.turns[i].speaker == Speaker::Therapist) {
          out.push_back({s.turns[i].utterance_id, query_pair_at(s, i)});
        }
      }
    }
    return out;
  }
};

}  // namespace

TEST_CASE("rationale prompt template") {
  ExemplarPair pos{Dimension::ActiveListening, Polarity::Positive, "I lost my job",
                   "It sounds like that hit you hard.", "x1", {}};
  const std::vector<ScoredExemplar> ex = {{&pos, 0.9}};
  const QueryPair target{"Nobody listens", "What I hear is that you feel ignored."};
  const auto p = compose_rationale_prompt(ex, target, Dimension::ActiveListening);
  CHECK(p.text.find("detailed explanation for Active Listening") != std::string::npos);
  CHECK(p.text.find("exactly 100 words") != std::string::npos);
  CHECK(p.text.find("hidden chain-of-thought") != std::string::npos);
  CHECK(p.text.find("Label Exclusive Utterances: It sounds like that hit you hard.") !=
        std::string::npos);
  CHECK(p.text.find("Therapist Current Utterance: What I hear is that you feel ignored.") !=
        std::string::npos);
  CHECK(p.exemplar_ids == std::vector<std::string>{"x1"});
  CHECK_FALSE(p.no_exemplars);
  CHECK(p.hash.size() == 64);

  const auto again = compose_rationale_prompt(ex, target, Dimension::ActiveListening);
  CHECK(again.text == p.text);
  CHECK(again.hash == p.hash);
  CHECK(compose_rationale_prompt(ex, target, Dimension::WarmthEncouragement).hash != p.hash);

  const auto empty = compose_rationale_prompt({}, target, Dimension::RespectAutonomy);
  CHECK(empty.no_exemplars);
  CHECK(empty.text.find("Label Exclusive Utterances:\n\nTherapist Current Utterance:") !=
        std::string::npos);
  CHECK(empty.text.find("detailed explanation for Respect for Autonomy") != std::string::npos);

  CHECK_THROWS_AS(compose_rationale_prompt(ex, {"p", ""}, Dimension::ActiveListening),
                  EmptyTargetError);
}

TEST_CASE("generate_rationale: cache, fixed text and fallback") {
  fixture::TempDir dir;
  const QueryPair target{"p", "t"};
  const auto prompt = compose_rationale_prompt({}, target, Dimension::NonJudgmental);

  SUBCASE("fixed text is stored and then served from cache") {
    RationaleCache cache(dir / "cache");
    MockTeacher teacher(MockTeacher::Mode::Fixed, "E");
    const auto r = generate_rationale(prompt, Dimension::NonJudgmental, "u1", teacher, cache,
                                      instant_retries());
    CHECK(r.text == "E");
    CHECK(r.status == RationaleStatus::Ok);
    CHECK(r.prompt_hash == prompt.hash);
    CHECK(teacher.calls() == 1);
    const auto again = generate_rationale(prompt, Dimension::NonJudgmental, "u1", teacher,
                                          cache, instant_retries());
    CHECK(again == r);
    CHECK(teacher.calls() == 1);
    CHECK(cache.size() == 1);

    // a fresh cache object over the same directory still hits
    RationaleCache reopened(dir / "cache");
    CHECK(generate_rationale(prompt, Dimension::NonJudgmental, "u1", teacher, reopened,
                             instant_retries()) == r);
    CHECK(teacher.calls() == 1);
  }

  SUBCASE("always failing teacher, three retries") {
    RationaleCache cache(dir / "cache2");
    MockTeacher teacher(MockTeacher::Mode::AlwaysFail);
    std::vector<std::chrono::milliseconds> slept;
    const auto r = generate_rationale(prompt, Dimension::NonJudgmental, "u1", teacher, cache,
                                      instant_retries(&slept));
    CHECK(r.status == RationaleStatus::FallbackEmpty);
    CHECK(r.text.empty());
    CHECK(teacher.calls() == 4);
    using std::chrono::milliseconds;
    CHECK(slept == std::vector<milliseconds>{milliseconds(1000), milliseconds(2000),
                                             milliseconds(4000)});
    // the fallback is cached too, so batches stay deterministic
    generate_rationale(prompt, Dimension::NonJudgmental, "u1", teacher, cache,
                       instant_retries());
    CHECK(teacher.calls() == 4);
  }
}

TEST_CASE("rationale JSON round trip") {
  Rationale r{"u7", Dimension::ReflectingFeelings, "because", "mock", "abc", "2026-01-01T00:00:00Z",
              RationaleStatus::Ok, {"e1", "e2"}};
  CHECK(rationale_from_json(to_json(r)) == r);
  const auto j = to_json(r);
  CHECK(j["key"]["dimension"] == "reflecting_feelings");
  CHECK(j["status"] == "OK");
  CHECK_THROWS_AS(rationale_from_json(nlohmann::json::object()), ParseError);
}

TEST_CASE("batch distillation") {
  Fixture f;
  fixture::TempDir dir;
  DistillConfig cfg;
  cfg.retry = instant_retries();

  SUBCASE("no instances") {
    RationaleCache cache(dir / "c");
    MockTeacher teacher;
    const auto set = batch_distill({}, f.pools, f.provider, teacher, cache, cfg);
    CHECK(set.rationales.empty());
    CHECK(set.summary.total() == 0);
    CHECK(teacher.calls() == 0);
  }

  SUBCASE("two instances, six dimensions, rerun is call-free") {
    RationaleCache cache(dir / "c");
    MockTeacher teacher;
    const auto inst = f.instances(2);
    const auto set = batch_distill(inst, f.pools, f.provider, teacher, cache, cfg);
    REQUIRE(set.rationales.size() == 12);
    CHECK(cache.size() == 12);
    CHECK(teacher.calls() == 12);
    for (std::size_t i = 0; i < 12; ++i) {
      const auto& r = set.rationales[i];
      CHECK(r.status == RationaleStatus::Ok);
      CHECK(r.utterance_id == inst[i / 6].utterance_id);
      CHECK(r.dimension == kAllDimensions[i % 6]);
      CHECK(r.exemplar_ids.size() <= 4);
      CHECK(r.text.find(inst[i / 6].query.therapist_text) != std::string::npos);
    }
    for (std::size_t d = 0; d < kNumDimensions; ++d) CHECK(set.summary.ok[d] == 2);

    const auto rerun = batch_distill(inst, f.pools, f.provider, teacher, cache, cfg);
    CHECK(teacher.calls() == 12);
    CHECK(rerun.rationales == set.rationales);

    std::stringstream io;
    write_rationales(set, io);
    const auto back = read_rationales(io);
    CHECK(back.rationales == set.rationales);
    REQUIRE(back.find(inst[1].utterance_id, Dimension::ActiveListening) != nullptr);
    CHECK(back.find("absent", Dimension::ActiveListening) == nullptr);
  }

  SUBCASE("polarity restriction and exemplar order") {
    RationaleCache cache(dir / "c");
    MockTeacher teacher;
    const auto inst = f.instances(1);
    cfg.polarity = PolarityMode::PositiveOnly;
    const auto set = batch_distill(inst, f.pools, f.provider, teacher, cache, cfg);
    for (const auto& r : set.rationales) {
      const auto& pos = f.pools.pool(r.dimension, Polarity::Positive);
      for (const auto& id : r.exemplar_ids) {
        CHECK(std::any_of(pos.begin(), pos.end(),
                          [&](const ExemplarPair& e) { return e.source_utterance_id == id; }));
      }
    }
  }

  SUBCASE("failures are absorbed and counted") {
    RationaleCache cache(dir / "c");
    MockTeacher teacher(MockTeacher::Mode::AlwaysFail);
    cfg.retry.max_retries = 1;
    const auto set = batch_distill(f.instances(3), f.pools, f.provider, teacher, cache, cfg);
    CHECK(set.rationales.size() == 18);
    for (std::size_t d = 0; d < kNumDimensions; ++d) CHECK(set.summary.fallback[d] == 3);
    CHECK(teacher.calls() == 36);
  }

  SUBCASE("output order does not depend on parallelism") {
    RationaleCache c1(dir / "c1"), c2(dir / "c2");
    MockTeacher t1, t2;
    const auto inst = f.instances(5);
    cfg.parallelism = 1;
    const auto serial = batch_distill(inst, f.pools, f.provider, t1, c1, cfg);
    cfg.parallelism = 8;
    const auto wide = batch_distill(inst, f.pools, f.provider, t2, c2, cfg);
    REQUIRE(serial.rationales.size() == wide.rationales.size());
    for (std::size_t i = 0; i < serial.rationales.size(); ++i) {
      CHECK(serial.rationales[i].utterance_id == wide.rationales[i].utterance_id);
      CHECK(serial.rationales[i].text == wide.rationales[i].text);
      CHECK(serial.rationales[i].prompt_hash == wide.rationales[i].prompt_hash);
    }
  }
}

TEST_CASE("cache journal tolerates a torn final line") {
  fixture::TempDir dir;
  {
    JsonlCache c(dir.path());
    c.put({{"key", {{"a", 1}}}, {"v", 1}});
    c.put({{"key", {{"a", 2}}}, {"v", 2}});
    CHECK_FALSE(c.put({{"key", {{"a", 1}}}, {"v", 99}}));
  }
  { std::ofstream(dir / "journal.jsonl", std::ios::app) << "{\"key\": {\"a\""; }
  JsonlCache reopened(dir.path());
  CHECK(reopened.size() == 2);
  CHECK((*reopened.get({{"a", 1}}))["v"] == 1);
  reopened.compact();
  CHECK(JsonlCache(dir.path()).size() == 2);
}
