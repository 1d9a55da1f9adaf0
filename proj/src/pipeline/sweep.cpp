#include "care/pipeline/sweep.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "care/checkpoint.hpp"
#include "care/embedding.hpp"
#include "care/errors.hpp"
#include "care/metrics.hpp"
#include "care/pipeline/artifacts.hpp"
#include "care/pipeline/commands.hpp"

namespace care::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) ? c : '-';
  return out;
}

std::string rationales_jsonl(const RationaleSet& set) {
  std::ostringstream out;
  write_rationales(set, out);
  return out.str();
}

}  // namespace

json run_sweep(const PipelineConfig& config, SweepStage stage) {
  const Workspace ws(config);
  const Corpus corpus = load_ingested_corpus(ws);
  const SplitAssignment split = load_split(ws, corpus);
  const ExemplarPools pools = load_pools(ws);
  auto provider = make_embedding_provider(config.embedding_provider);
  RationaleCache cache(ws.rationale_cache());

  const auto train_ids = split_utterance_ids(corpus, split.train);
  const auto val_ids = split_utterance_ids(corpus, split.validation);
  const auto test_ids = split_utterance_ids(corpus, split.test);
  std::vector<std::string> all_ids = train_ids;
  all_ids.insert(all_ids.end(), val_ids.begin(), val_ids.end());
  all_ids.insert(all_ids.end(), test_ids.begin(), test_ids.end());
  const auto instances = distill_instances(corpus, all_ids);

  std::set<std::string> heldout = all_utterance_ids(corpus, split.validation);
  heldout.merge(all_utterance_ids(corpus, split.test));
  const std::map<std::string, Labels> gold(corpus.annotations().begin(),
                                           corpus.annotations().end());

  std::vector<std::string> teachers = config.sweep.teachers;
  if (teachers.empty()) teachers.push_back(config.teacher);

  std::string csv = "# config_fingerprint=" + ws.config_fingerprint() + "\n";
  csv +=
      "teacher,polarity,k,accuracy,macro_precision,macro_recall,macro_f1,"
      "weighted_precision,weighted_recall,weighted_f1\n";
  json cells = json::array();

  for (const auto& teacher_spec : teachers) {
    auto teacher = make_teacher(teacher_spec);
    for (PolarityMode polarity : config.sweep.polarity) {
      const fs::path group = ws.root() / "sweep" /
                             fmt::format("{}_{}", sanitize(teacher->id()), to_key(polarity));
      const fs::path rationale_path = group / "rationales.jsonl";
      RationaleSet rationales;
      if (stage == SweepStage::Train) {
        DistillConfig dc;
        dc.polarity = polarity;
        dc.top_n = config.top_n;
        dc.parallelism = config.parallelism;
        dc.retry = config.retry_policy();
        dc.decoding = config.decoding;
        rationales = batch_distill(instances, pools, *provider, *teacher, cache, dc);
        ws.write(rationale_path, rationales_jsonl(rationales), "train --sweep");
      } else {
        rationales = load_rationale_set(rationale_path);
      }

      for (int k : config.sweep.k) {
        const fs::path cell_dir = group / fmt::format("k{}", k);
        TrainConfig tc = config.train;
        tc.k = k;
        CareModel model(tc);
        std::string checkpoint_fp;
        if (stage == SweepStage::Train) {
          const auto train_set = training_examples(corpus, train_ids, k, &rationales);
          const auto val_set = training_examples(corpus, val_ids, k, &rationales);
          LeakageGuard guard{&pools, &rationales, heldout};
          const TrainResult result = train(train_set, val_set, tc, guard);
          ModelCheckpoint ckpt{tc, result.params, result.history, result.best_epoch,
                               corpus.fingerprint()};
          save_checkpoint(ckpt, cell_dir / "model");
          ws.record(cell_dir / "model" / "fingerprint", "train --sweep");
          model = CareModel(tc, result.params);
          checkpoint_fp = ckpt.fingerprint();
        } else {
          ws.require(cell_dir / "model" / "fingerprint", "train --sweep");
          const ModelCheckpoint ckpt = load_checkpoint(cell_dir / "model");
          model = CareModel(ckpt.config, ckpt.params);
          checkpoint_fp = ckpt.fingerprint();
        }

        std::vector<ModelInstance> test_instances;
        for (const auto& id : test_ids) {
          test_instances.push_back(model_instance(corpus, id, k, &rationales));
        }
        const auto records = predict_batch(
            model, test_instances, {checkpoint_fp, ws.config_fingerprint(), corpus.fingerprint()});
        std::ostringstream out;
        write_predictions(records, out);
        ws.write(cell_dir / "predictions_test.jsonl", out.str(),
                 stage == SweepStage::Train ? "train --sweep" : "predict --sweep");

        json cell = {{"teacher", teacher->id()},
                     {"polarity", to_key(polarity)},
                     {"k", k},
                     {"checkpoint", checkpoint_fp}};
        if (records.empty()) {
          spdlog::warn("sweep cell {} has no test instances", cell_dir.string());
          cells.push_back(cell);
          continue;
        }
        const MetricsReport rep = classification_metrics(records, gold);
        const Averages& a = rep.pooled;
        csv += fmt::format("{},{},{},{:.2f},{:.2f},{:.2f},{:.2f},{:.2f},{:.2f},{:.2f}\n",
                           teacher->id(), to_key(polarity), k, as_percent(a.accuracy),
                           as_percent(a.macro_precision), as_percent(a.macro_recall),
                           as_percent(a.macro_f1), as_percent(a.weighted_precision),
                           as_percent(a.weighted_recall), as_percent(a.weighted_f1));
        cell["weighted_f1"] = as_percent(a.weighted_f1);
        cell["macro_f1"] = as_percent(a.macro_f1);
        cell["accuracy"] = as_percent(a.accuracy);
        cells.push_back(cell);
      }
    }
  }
  ws.write(ws.root() / "sweep" / "summary.csv", csv, "sweep");
  const json summary = {{"config_fingerprint", ws.config_fingerprint()}, {"cells", cells}};
  ws.write(ws.root() / "sweep" / "summary.json", summary.dump(2) + "\n", "sweep");
  return summary;
}

}  // namespace care::pipeline
