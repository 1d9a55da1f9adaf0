#include "care/pipeline/commands.hpp"

#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "care/baselines.hpp"
#include "care/checkpoint.hpp"
#include "care/context.hpp"
#include "care/embedding.hpp"
#include "care/errors.hpp"
#include "care/exemplar_index.hpp"
#include "care/pipeline/report.hpp"
#include "care/pipeline/sweep.hpp"

namespace care::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Loaders

Corpus load_ingested_corpus(const Workspace& ws) {
  ws.require(ws.corpus_utterances(), "ingest");
  std::ifstream utt(ws.corpus_utterances());
  std::ifstream ann(ws.corpus_annotations());
  return read_corpus(utt, ann ? &ann : nullptr);
}

SplitAssignment load_split(const Workspace& ws, const Corpus& corpus) {
  ws.require(ws.split(), "split");
  const json j = json::parse(read_text(ws.split()));
  if (j.value("corpus_fingerprint", std::string{}) != corpus.fingerprint()) {
    throw FingerprintMismatchError("split.json was produced for a different corpus; rerun "
                                   "`care split`");
  }
  return split_from_json(j, corpus);
}

Split split_from_key(const std::string& key) {
  if (key == "train") return Split::Train;
  if (key == "validation" || key == "val") return Split::Validation;
  if (key == "test") return Split::Test;
  throw ConfigError("split must be train|validation|test, got '" + key + "'");
}

ExemplarPools load_pools(const Workspace& ws) {
  ws.require(ws.index(), "build-index");
  return load_index(ws.index());
}

RationaleSet load_rationale_set(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError(path.string() + " is missing; run `care distill` first");
  return read_rationales(in);
}

std::vector<std::string> split_utterance_ids(const Corpus& corpus,
                                             const std::set<std::string>& sessions) {
  return annotated_ids(corpus, sessions);
}

std::set<std::string> all_utterance_ids(const Corpus& corpus,
                                        const std::set<std::string>& sessions) {
  std::set<std::string> out;
  for (const auto& s : corpus.sessions()) {
    if (!sessions.contains(s.id)) continue;
    for (const auto& u : s.turns) out.insert(u.utterance_id);
  }
  return out;
}

ModelInstance model_instance(const Corpus& corpus, const std::string& utterance_id, int k,
                             const RationaleSet* rationales) {
  const auto loc = corpus.locate(utterance_id);
  if (!loc) throw TurnNotFoundError("utterance " + utterance_id + " is not in the corpus");
  const Session& session = corpus.sessions()[loc->session];
  ModelInstance inst;
  inst.utterance_id = utterance_id;
  inst.k = k;
  inst.window = build_context_window(session, session.turns[loc->position].turn_index, k);
  if (rationales != nullptr) {
    for (Dimension d : kAllDimensions) {
      if (const Rationale* r = rationales->find(utterance_id, d)) {
        inst.rationales[dimension_index(d)] = r->text;
      }
    }
  }
  return inst;
}

std::vector<TrainingExample> training_examples(const Corpus& corpus,
                                               const std::vector<std::string>& ids, int k,
                                               const RationaleSet* rationales) {
  std::vector<TrainingExample> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    const Labels* gold = corpus.labels(id);
    if (gold == nullptr) throw AnnotationTargetError("utterance " + id + " has no labels");
    out.push_back({model_instance(corpus, id, k, rationales), *gold});
  }
  return out;
}

std::vector<DistillInstance> distill_instances(const Corpus& corpus,
                                               const std::vector<std::string>& ids) {
  std::vector<DistillInstance> out;
  for (const auto& id : ids) {
    const auto loc = corpus.locate(id);
    if (!loc) throw TurnNotFoundError("utterance " + id + " is not in the corpus");
    out.push_back({id, query_pair_at(corpus.sessions()[loc->session], loc->position)});
  }
  return out;
}

namespace {

void require_input(const fs::path& path, const char* field) {
  if (path.empty()) throw ConfigError(std::string(field) + ": no path configured");
  if (!fs::exists(path)) {
    throw ConfigError(std::string(field) + ": " + path.string() + " does not exist");
  }
}

std::vector<std::string> all_annotated(const Corpus& corpus) {
  std::set<std::string> sessions;
  for (const auto& s : corpus.sessions()) sessions.insert(s.id);
  return annotated_ids(corpus, sessions);
}

std::string records_jsonl(const std::vector<PredictionRecord>& records) {
  std::ostringstream out;
  write_predictions(records, out);
  return out.str();
}

std::vector<PredictionRecord> read_records(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError(path.string() + " is missing");
  return read_predictions(in);
}

}  // namespace

// ---------------------------------------------------------------------------
// Commands

json run_ingest(const PipelineConfig& config) {
  require_input(config.utterances, "corpus.utterances");
  if (config.annotations) require_input(*config.annotations, "corpus.annotations");
  const Workspace ws(config);
  const Corpus corpus = ingest_corpus(config.utterances, config.annotations);
  std::ostringstream utt, ann;
  write_corpus(corpus, utt, ann);
  ws.write(ws.corpus_utterances(), utt.str(), "ingest");
  ws.write(ws.corpus_annotations(), ann.str(), "ingest");
  const json summary = {{"config_fingerprint", ws.config_fingerprint()},
                        {"corpus_fingerprint", corpus.fingerprint()},
                        {"sessions", corpus.sessions().size()},
                        {"utterances", corpus.num_utterances()},
                        {"therapist_utterances", corpus.num_therapist_utterances()},
                        {"annotated", corpus.num_annotated()}};
  ws.write(ws.ingest_summary(), summary.dump(2) + "\n", "ingest");
  return summary;
}

json run_split(const PipelineConfig& config) {
  const Workspace ws(config);
  const Corpus corpus = load_ingested_corpus(ws);
  SplitAssignment split;
  if (config.split_file) {
    require_input(*config.split_file, "split.file");
    split = read_split_file(*config.split_file, corpus);
  } else {
    split = split_sessions(corpus, config.ratios, config.split_seed);
  }
  json out = to_json(split);
  out["config_fingerprint"] = ws.config_fingerprint();
  out["corpus_fingerprint"] = corpus.fingerprint();
  json counts = json::object();
  for (Split s : {Split::Train, Split::Validation, Split::Test}) {
    counts[std::string(to_key(s))] = {
        {"sessions", split.sessions(s).size()},
        {"annotated_utterances", annotated_ids(corpus, split.sessions(s)).size()}};
  }
  out["counts"] = counts;
  ws.write(ws.split(), out.dump(2) + "\n", "split");
  return {{"config_fingerprint", ws.config_fingerprint()}, {"counts", counts}};
}

json run_validate(const PipelineConfig& config) {
  require_input(config.utterances, "corpus.utterances");
  if (config.annotations) require_input(*config.annotations, "corpus.annotations");
  const Workspace ws(config);
  const Corpus corpus = ingest_corpus(config.utterances, config.annotations);
  const ValidationReport report = validate_corpus(corpus);
  json j = to_json(report);
  j["config_fingerprint"] = ws.config_fingerprint();
  j["corpus_fingerprint"] = corpus.fingerprint();
  ws.write(ws.validation_json(), j.dump(2) + "\n", "validate");
  ws.write(ws.validation_csv(),
           "# config_fingerprint=" + ws.config_fingerprint() + "\n" + to_csv(report),
           "validate");
  for (const auto& w : report.warnings) spdlog::warn("{}", w);
  return j;
}

json run_build_index(const PipelineConfig& config) {
  const Workspace ws(config);
  const Corpus corpus = load_ingested_corpus(ws);
  const SplitAssignment split = load_split(ws, corpus);
  const Corpus train = corpus.subset(split.train);
  auto provider = make_embedding_provider(config.embedding_provider);
  PoolBuildOptions opts;
  opts.parallelism = config.parallelism;
  const PoolBuildResult built = build_pools(train, *provider, opts);
  for (const auto& w : built.warnings) spdlog::warn("{}", w);

  const auto issues = audit_pools(built.pools, corpus, split);
  if (!issues.empty()) throw DataLeakageError("exemplar pool audit failed: " + issues.front());

  const json meta = {{"config_fingerprint", ws.config_fingerprint()},
                     {"corpus_fingerprint", corpus.fingerprint()},
                     {"provider", provider->id()}};
  fs::create_directories(ws.index().parent_path());
  persist_index(built.pools, ws.index(), meta.dump());
  ws.record(ws.index(), "build-index");

  json pools = json::object();
  for (Dimension d : kAllDimensions) {
    for (Polarity p : kAllPolarities) {
      pools[std::string(to_key(d))][std::string(to_key(p))] = built.pools.pool(d, p).size();
    }
  }
  json summary = meta;
  summary["pools"] = pools;
  summary["total_exemplars"] = built.pools.total_size();
  summary["warnings"] = built.warnings;
  ws.write(ws.index_summary(), summary.dump(2) + "\n", "build-index");
  return summary;
}

json run_distill(const PipelineConfig& config) {
  const Workspace ws(config);
  const Corpus corpus = load_ingested_corpus(ws);
  load_split(ws, corpus);
  const ExemplarPools pools = load_pools(ws);
  auto provider = make_embedding_provider(config.embedding_provider);
  auto teacher = make_teacher(config.teacher);
  RationaleCache cache(ws.rationale_cache());

  DistillConfig dc;
  dc.polarity = config.polarity;
  dc.top_n = config.top_n;
  dc.parallelism = config.parallelism;
  dc.retry = config.retry_policy();
  dc.decoding = config.decoding;
  const auto instances = distill_instances(corpus, all_annotated(corpus));
  const RationaleSet set = batch_distill(instances, pools, *provider, *teacher, cache, dc);

  std::ostringstream out;
  write_rationales(set, out);
  ws.write(ws.rationales(), out.str(), "distill");
  json summary = {{"config_fingerprint", ws.config_fingerprint()},
                  {"corpus_fingerprint", corpus.fingerprint()},
                  {"teacher", teacher->id()},
                  {"polarity", to_key(config.polarity)},
                  {"instances", instances.size()},
                  {"coverage", to_json(set.summary)}};
  ws.write(ws.coverage(), summary.dump(2) + "\n", "distill");
  return summary;
}

json run_train(const PipelineConfig& config) {
  const Workspace ws(config);
  const Corpus corpus = load_ingested_corpus(ws);
  const SplitAssignment split = load_split(ws, corpus);
  const ExemplarPools pools = load_pools(ws);
  std::optional<RationaleSet> rationales;
  if (config.train.use_knowledge) rationales = load_rationale_set(ws.rationales());
  const RationaleSet* rs = rationales ? &*rationales : nullptr;

  const auto train_set =
      training_examples(corpus, split_utterance_ids(corpus, split.train), config.care_k, rs);
  const auto val_set = training_examples(
      corpus, split_utterance_ids(corpus, split.validation), config.care_k, rs);

  LeakageGuard guard;
  guard.pools = &pools;
  guard.rationales = rs;
  guard.heldout_ids = all_utterance_ids(corpus, split.validation);
  guard.heldout_ids.merge(all_utterance_ids(corpus, split.test));

  TrainConfig tc = config.train;
  tc.k = config.care_k;
  const TrainResult result = train(train_set, val_set, tc, guard);

  ModelCheckpoint ckpt{tc, result.params, result.history, result.best_epoch,
                       corpus.fingerprint()};
  save_checkpoint(ckpt, ws.model_dir());
  for (const char* f : {"config.json", "adapter.bin", "head.bin", "metrics.csv", "fingerprint"}) {
    ws.record(ws.model_dir() / f, "train");
  }
  const auto& best = result.history[result.best_epoch];
  const auto& last = result.history.back();
  return {{"config_fingerprint", ws.config_fingerprint()},
          {"checkpoint", ckpt.fingerprint()},
          {"train_examples", train_set.size()},
          {"val_examples", val_set.size()},
          {"epochs", tc.epochs},
          {"best_epoch", result.best_epoch},
          {"best_val_weighted_f1", best.val_weighted_f1},
          {"best_train_weighted_f1", best.train_weighted_f1},
          {"final_train_weighted_f1", last.train_weighted_f1},
          {"final_train_loss", last.train_loss}};
}

json run_predict(const PipelineConfig& config, const std::string& split_key) {
  const Workspace ws(config);
  const Corpus corpus = load_ingested_corpus(ws);
  const SplitAssignment split = load_split(ws, corpus);
  ws.require(ws.model_dir() / "fingerprint", "train");
  const ModelCheckpoint ckpt = load_checkpoint(ws.model_dir());
  if (!ckpt.corpus_fingerprint.empty() && ckpt.corpus_fingerprint != corpus.fingerprint()) {
    throw FingerprintMismatchError("checkpoint was trained on a different corpus");
  }
  std::optional<RationaleSet> rationales;
  if (ckpt.config.use_knowledge) rationales = load_rationale_set(ws.rationales());

  const Split s = split_from_key(split_key);
  std::vector<ModelInstance> instances;
  for (const auto& id : split_utterance_ids(corpus, split.sessions(s))) {
    instances.push_back(
        model_instance(corpus, id, config.care_k, rationales ? &*rationales : nullptr));
  }
  const CareModel model(ckpt.config, ckpt.params);
  const auto records = predict_batch(
      model, instances, {ckpt.fingerprint(), ws.config_fingerprint(), corpus.fingerprint()});
  const auto path = ws.predictions(to_key(s));
  ws.write(path, records_jsonl(records), "predict");
  return {{"config_fingerprint", ws.config_fingerprint()},
          {"checkpoint", ckpt.fingerprint()},
          {"split", to_key(s)},
          {"records", records.size()},
          {"output", path.string()}};
}

json run_baseline(const PipelineConfig& config, const std::string& split_key) {
  const Workspace ws(config);
  const Corpus corpus = load_ingested_corpus(ws);
  const SplitAssignment split = load_split(ws, corpus);
  const Split s = split_from_key(split_key);

  std::vector<BaselineInstance> instances;
  for (const auto& d : distill_instances(corpus, split_utterance_ids(corpus, split.sessions(s)))) {
    instances.push_back({d.utterance_id, d.query.patient_text, d.query.therapist_text});
  }
  auto client = make_teacher(config.baseline_client);
  JsonlCache cache(ws.baseline_cache());
  BaselineOptions opts;
  opts.mode = config.baseline_mode;
  opts.parallelism = config.parallelism;
  opts.retry = config.retry_policy();
  opts.decoding = config.decoding;
  opts.config_fingerprint = ws.config_fingerprint();
  opts.corpus_fingerprint = corpus.fingerprint();
  const BaselineResult result = run_prompt_baseline(instances, *client, cache, opts);

  const auto path = ws.baseline_predictions(to_key(config.baseline_mode), to_key(s));
  ws.write(path, records_jsonl(result.records), "baseline");
  return {{"config_fingerprint", ws.config_fingerprint()},
          {"mode", to_key(config.baseline_mode)},
          {"client_id", client->id()},
          {"split", to_key(s)},
          {"records", result.records.size()},
          {"unscored", result.unscored_ids},
          {"client_calls", result.client_calls},
          {"output", path.string()}};
}

json run_report(const PipelineConfig& config, const CommandOptions& options) {
  if (options.predictions.empty()) {
    throw ConfigError("report: at least one --predictions file is required");
  }
  const Workspace ws(config);
  const Corpus corpus = load_ingested_corpus(ws);

  std::vector<std::vector<PredictionRecord>> files;
  std::vector<std::string> names;
  for (const auto& p : options.predictions) {
    files.push_back(read_records(p));
    names.push_back(p.string());
  }
  std::optional<std::vector<PredictionRecord>> reference;
  if (options.reference) {
    reference = read_records(*options.reference);
    files.push_back(*reference);
    names.push_back(options.reference->string());
  }
  check_corpus_fingerprints(files, names, corpus.fingerprint());

  std::map<std::string, Labels> gold(corpus.annotations().begin(), corpus.annotations().end());
  json out = {{"config_fingerprint", ws.config_fingerprint()}, {"reports", json::object()}};
  for (std::size_t i = 0; i < options.predictions.size(); ++i) {
    std::string name = options.report_name.empty() ? options.predictions[i].stem().string()
                                                   : options.report_name;
    if (!options.report_name.empty() && options.predictions.size() > 1) {
      name += "_" + std::to_string(i);
    }
    const auto dir = ws.report_dir(name);
    out["reports"][name] = write_metrics_bundle(ws, dir, files[i], gold,
                                                reference ? &*reference : nullptr,
                                                options.heatmaps);
    out["reports"][name]["directory"] = dir.string();
  }
  return out;
}

json run_command(const std::string& name, const PipelineConfig& config,
                 const CommandOptions& options) {
  if (name == "ingest") return run_ingest(config);
  if (name == "split") return run_split(config);
  if (name == "validate") return run_validate(config);
  if (name == "build-index") return run_build_index(config);
  if (name == "distill") return run_distill(config);
  if (name == "train") {
    return options.sweep ? run_sweep(config, SweepStage::Train) : run_train(config);
  }
  if (name == "predict") {
    return options.sweep ? run_sweep(config, SweepStage::Predict)
                         : run_predict(config, options.split);
  }
  if (name == "baseline") return run_baseline(config, options.split);
  if (name == "report") return run_report(config, options);
  throw ConfigError("unknown command '" + name + "'");
}

}  // namespace care::pipeline
