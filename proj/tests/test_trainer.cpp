#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "care/checkpoint.hpp"
#include "care/errors.hpp"
#include "care/pipeline/commands.hpp"
#include "care/synthetic.hpp"
#include "care/trainer.hpp"
#include "fixtures.hpp"

using namespace care;

namespace {

TrainConfig small_config() {
  TrainConfig c;
  c.vocab_size = 512;
  c.hidden_width = 16;
  c.layers = 1;
  c.heads = 2;
  c.ffn_width = 32;
  c.adapter_rank = 2;
  c.adapter_scale = 4.0;
  c.fusion_heads = 2;
  c.learning_rate = 3e-3;
  c.batch_size = 4;
  c.epochs = 2;
  c.max_sequence_length = 128;
  return c;
}

struct Data {
  Corpus corpus;
  std::vector<TrainingExample> train, val;
  std::vector<std::string> val_ids;

  Data() {
    const auto s = make_keyword_corpus(3, 4);
    corpus = Corpus::build(s.utterances, s.annotations);
    const auto ids = corpus.session_ids();
    const auto tr = pipeline::split_utterance_ids(corpus, {ids[0], ids[1]});
    val_ids = pipeline::split_utterance_ids(corpus, {ids[2]});
    train = pipeline::training_examples(corpus, tr, 3, nullptr);
    val = pipeline::training_examples(corpus, val_ids, 3, nullptr);
  }
};

}  // namespace

TEST_CASE("training is deterministic for a fixed seed") {
  Data d;
  const auto cfg = small_config();
  const auto a = train(d.train, d.val, cfg);
  const auto b = train(d.train, d.val, cfg);
  REQUIRE(a.history.size() == cfg.epochs + 1);
  CHECK(a.history == b.history);
  CHECK(a.params == b.params);
  CHECK(a.best_epoch == b.best_epoch);
  for (const auto& h : a.history) {
    CHECK(std::isfinite(h.train_loss));
    CHECK(h.train_weighted_f1 >= 0.0);
    CHECK(h.train_weighted_f1 <= 1.0);
  }
  // the selected epoch has the best validation F1, earliest on ties
  for (std::size_t e = 0; e < a.history.size(); ++e) {
    if (e < a.best_epoch) CHECK(a.history[e].val_weighted_f1 < a.history[a.best_epoch].val_weighted_f1);
    else CHECK(a.history[e].val_weighted_f1 <= a.history[a.best_epoch].val_weighted_f1);
  }

  auto other = cfg;
  other.seed = 7;
  CHECK_FALSE(train(d.train, d.val, other).history == a.history);
}

TEST_CASE("zero epochs returns the initialization") {
  Data d;
  auto cfg = small_config();
  cfg.epochs = 0;
  const auto r = train(d.train, d.val, cfg);
  CHECK(r.history.size() == 1);
  CHECK(r.best_epoch == 0);
  CHECK(r.params == CareModel(cfg).params());

  const auto no_val = train(d.train, {}, cfg);
  CHECK(no_val.history[0].val_weighted_f1 == 0.0);
}

TEST_CASE("training preconditions") {
  Data d;
  auto cfg = small_config();
  CHECK_THROWS_AS(train({}, d.val, cfg), EmptyInputError);
  cfg.k = 2;
  CHECK_THROWS_AS(train(d.train, d.val, cfg), FingerprintMismatchError);
  cfg = small_config();
  cfg.learning_rate = 1e200;
  cfg.gradient_clip = 0.0;
  cfg.epochs = 3;
  CHECK_THROWS_AS(train(d.train, d.val, cfg), NonFiniteLossError);
}

TEST_CASE("leakage guard") {
  Data d;
  HashingEmbeddingProvider provider(16);
  const auto ids = d.corpus.session_ids();
  const auto train_corpus = d.corpus.subset({ids[0], ids[1]});
  auto pools = build_pools(train_corpus, provider).pools;

  LeakageGuard guard;
  guard.pools = &pools;
  guard.heldout_ids = {d.val_ids.begin(), d.val_ids.end()};
  CHECK_NOTHROW(check_leakage(guard, d.train));

  SUBCASE("held-out utterance planted in a pool") {
    auto leaked = pools;
    const auto* u = d.corpus.find_utterance(d.val_ids[0]);
    leaked.pool(Dimension::NonJudgmental, Polarity::Positive)
        .push_back({Dimension::NonJudgmental, Polarity::Positive, "p", u->text, u->utterance_id,
                    std::vector<float>(16, 0.25f)});
    guard.pools = &leaked;
    CHECK_THROWS_AS(check_leakage(guard, d.train), DataLeakageError);
    CHECK_THROWS_AS(train(d.train, d.val, small_config(), guard), DataLeakageError);
  }
  SUBCASE("held-out exemplar in a rationale prompt") {
    RationaleSet set;
    set.rationales.push_back(
        {d.train[0].instance.utterance_id, Dimension::ActiveListening, "r", "mock", "h", "",
         RationaleStatus::Ok, {d.val_ids[1]}});
    guard.rationales = &set;
    CHECK_THROWS_AS(check_leakage(guard, d.train), DataLeakageError);
  }
  SUBCASE("held-out utterance among training examples") {
    auto mixed = d.train;
    mixed.push_back(d.val[0]);
    CHECK_THROWS_AS(check_leakage(guard, mixed), DataLeakageError);
  }
}

TEST_CASE("batch prediction") {
  Data d;
  auto cfg = small_config();
  CareModel model(cfg);
  std::vector<ModelInstance> inst;
  for (const auto& ex : d.val) inst.push_back(ex.instance);

  CHECK(predict_batch(model, {}).empty());

  const PredictionContext ctx{"ckpt", "cfg", "corp"};
  const auto batch = predict_batch(model, inst, ctx);
  REQUIRE(batch.size() == inst.size());
  for (std::size_t i = 0; i < inst.size(); ++i) {
    const auto single = predict_batch(model, std::span(&inst[i], 1), ctx);
    CHECK(batch[i].utterance_id == inst[i].utterance_id);
    CHECK(batch[i].checkpoint == "ckpt");
    CHECK(batch[i].corpus_fingerprint == "corp");
    for (std::size_t dd = 0; dd < kNumDimensions; ++dd) {
      for (std::size_t c = 0; c < kNumClasses; ++c) {
        CHECK(std::abs((*batch[i].scores)[dd].probs[c] - (*single[0].scores)[dd].probs[c]) <
              1e-5);
      }
    }
  }

  const std::vector<ModelInstance> dup = {inst[0], inst[0]};
  const auto twice = predict_batch(model, dup);
  CHECK(twice[0].scores == twice[1].scores);

  auto wrong_k = inst[0];
  wrong_k.k = 2;
  CHECK_THROWS_AS(predict_batch(model, std::span(&wrong_k, 1)), FingerprintMismatchError);
}

TEST_CASE("checkpoint round trip") {
  Data d;
  fixture::TempDir dir;
  const auto cfg = small_config();
  const auto r = train(d.train, d.val, cfg);
  ModelCheckpoint ckpt{cfg, r.params, r.history, r.best_epoch, d.corpus.fingerprint()};
  save_checkpoint(ckpt, dir / "model");
  for (const char* f : {"config.json", "adapter.bin", "head.bin", "metrics.csv", "fingerprint"}) {
    CHECK(std::filesystem::exists(dir / "model" / f));
  }
  const auto loaded = load_checkpoint(dir / "model");
  CHECK(loaded.params == ckpt.params);
  CHECK(loaded.history == ckpt.history);
  CHECK(loaded.best_epoch == ckpt.best_epoch);
  CHECK(loaded.corpus_fingerprint == ckpt.corpus_fingerprint);
  CHECK(config_fingerprint(loaded.config) == config_fingerprint(cfg));
  CHECK(loaded.fingerprint() == ckpt.fingerprint());

  // predictions from the reloaded model are identical
  std::vector<ModelInstance> inst;
  for (const auto& ex : d.val) inst.push_back(ex.instance);
  const auto before = predict_batch(CareModel(cfg, r.params), inst);
  const auto after = predict_batch(CareModel(loaded.config, loaded.params), inst);
  for (std::size_t i = 0; i < inst.size(); ++i) CHECK(before[i].scores == after[i].scores);

  SUBCASE("tampered weights") {
    std::fstream f(dir / "model" / "head.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(-3, std::ios::end);
    f.put('\x7f');
    f.close();
    CHECK_THROWS_AS(load_checkpoint(dir / "model"), FingerprintMismatchError);
  }
  SUBCASE("missing file") {
    std::filesystem::remove(dir / "model" / "adapter.bin");
    CHECK_THROWS_AS(load_checkpoint(dir / "model"), MissingArtifactError);
  }
  SUBCASE("history csv") {
    const auto csv = history_csv(r.history, "fp");
    CHECK(csv.rfind("# config_fingerprint=fp\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(r.history.size() + 2));
  }
}
