#include "care/pipeline/config.hpp"

#include <fstream>
#include <set>

#include "care/errors.hpp"
#include "care/hashing.hpp"

namespace care::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

RetryPolicy PipelineConfig::retry_policy() const {
  RetryPolicy p;
  p.max_retries = max_retries;
  p.base_delay = std::chrono::milliseconds(retry_base_delay_ms);
  return p;
}

json to_json(const PipelineConfig& c) {
  json split = {{"ratios", {c.ratios.train, c.ratios.validation, c.ratios.test}},
                {"seed", c.split_seed}};
  if (c.split_file) split["file"] = c.split_file->string();
  json corpus = {{"utterances", c.utterances.string()}};
  if (c.annotations) corpus["annotations"] = c.annotations->string();
  json polarity = json::array();
  for (auto p : c.sweep.polarity) polarity.push_back(to_key(p));
  return {
      {"corpus", corpus},
      {"split", split},
      {"context", {{"care_k", c.care_k}, {"baseline_k", c.baseline_k}}},
      {"embedding", {{"provider", c.embedding_provider}}},
      {"teacher",
       {{"id", c.teacher},
        {"temperature", c.decoding.temperature},
        {"max_tokens", c.decoding.max_tokens},
        {"max_retries", c.max_retries},
        {"base_delay_ms", c.retry_base_delay_ms}}},
      {"distill",
       {{"polarity", to_key(c.polarity)}, {"top_n", c.top_n}, {"parallelism", c.parallelism}}},
      {"train", to_json(c.train)},
      {"baseline", {{"client", c.baseline_client}, {"mode", to_key(c.baseline_mode)}}},
      {"sweep", {{"k", c.sweep.k}, {"polarity", polarity}, {"teachers", c.sweep.teachers}}},
      {"output_dir", c.output_dir.string()},
  };
}

std::string PipelineConfig::fingerprint() const {
  json j = to_json(*this);
  j.erase("output_dir");
  return care::fingerprint(j.dump());
}

namespace {

// Reads one JSON object, remembering which keys were consumed so leftovers
// can be reported as unknown fields.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(field(key) + ": wrong type (" + j_.at(key).dump() + ")");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.contains(k)) throw ConfigError(field(k.c_str()) + ": unknown field");
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  if (path.empty() || path.is_absolute() || base.empty()) return path;
  return base / path;
}

}  // namespace

PipelineConfig pipeline_config_from_json(const json& j, const fs::path& base_dir) {
  PipelineConfig c;
  Section root(j, "");

  if (const json* s = root.child("corpus")) {
    Section sec(*s, "corpus");
    std::string utt, ann;
    sec.read("utterances", utt);
    sec.read("annotations", ann);
    sec.finish();
    c.utterances = resolve(base_dir, utt);
    if (!ann.empty()) c.annotations = resolve(base_dir, ann);
  }
  if (const json* s = root.child("split")) {
    Section sec(*s, "split");
    std::string file;
    std::vector<double> ratios;
    sec.read("file", file);
    sec.read("ratios", ratios);
    sec.read("seed", c.split_seed);
    sec.finish();
    if (!file.empty()) c.split_file = resolve(base_dir, file);
    if (!ratios.empty()) {
      if (ratios.size() != 3) throw ConfigError("split.ratios: expected three values");
      c.ratios = {ratios[0], ratios[1], ratios[2]};
    }
  }
  if (const json* s = root.child("context")) {
    Section sec(*s, "context");
    sec.read("care_k", c.care_k);
    sec.read("baseline_k", c.baseline_k);
    sec.finish();
  }
  if (const json* s = root.child("embedding")) {
    Section sec(*s, "embedding");
    sec.read("provider", c.embedding_provider);
    sec.finish();
  }
  if (const json* s = root.child("teacher")) {
    Section sec(*s, "teacher");
    sec.read("id", c.teacher);
    sec.read("temperature", c.decoding.temperature);
    sec.read("max_tokens", c.decoding.max_tokens);
    sec.read("max_retries", c.max_retries);
    sec.read("base_delay_ms", c.retry_base_delay_ms);
    sec.finish();
  }
  if (const json* s = root.child("distill")) {
    Section sec(*s, "distill");
    std::string polarity = std::string(to_key(c.polarity));
    sec.read("polarity", polarity);
    sec.read("top_n", c.top_n);
    sec.read("parallelism", c.parallelism);
    sec.finish();
    try {
      c.polarity = polarity_mode_from_key(polarity);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("distill.polarity: ") + e.what());
    }
  }
  if (const json* s = root.child("train")) {
    try {
      c.train = train_config_from_json(*s);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("train: ") + e.what());
    }
  }
  if (const json* s = root.child("baseline")) {
    Section sec(*s, "baseline");
    std::string mode = std::string(to_key(c.baseline_mode));
    sec.read("client", c.baseline_client);
    sec.read("mode", mode);
    sec.finish();
    try {
      c.baseline_mode = baseline_mode_from_key(mode);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("baseline.mode: ") + e.what());
    }
  }
  if (const json* s = root.child("sweep")) {
    Section sec(*s, "sweep");
    std::vector<std::string> polarity;
    sec.read("k", c.sweep.k);
    sec.read("polarity", polarity);
    sec.read("teachers", c.sweep.teachers);
    sec.finish();
    if (s->contains("polarity")) {
      c.sweep.polarity.clear();
      for (const auto& p : polarity) {
        try {
          c.sweep.polarity.push_back(polarity_mode_from_key(p));
        } catch (const ConfigError& e) {
          throw ConfigError(std::string("sweep.polarity: ") + e.what());
        }
      }
    }
  }
  std::string out = c.output_dir.string();
  root.read("output_dir", out);
  c.output_dir = resolve(base_dir, out);
  root.finish();

  // Keep the model's preparation parameter in step with the context setting.
  c.train.k = c.care_k;
  if (c.care_k < 0) throw ConfigError("context.care_k: must be >= 0");
  if (c.baseline_k < 0) throw ConfigError("context.baseline_k: must be >= 0");
  if (c.top_n == 0) throw ConfigError("distill.top_n: must be >= 1");
  if (c.max_retries < 0) throw ConfigError("teacher.max_retries: must be >= 0");
  for (int k : c.sweep.k) {
    if (k < 0) throw ConfigError("sweep.k: values must be >= 0");
  }
  try {
    c.train.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("train: ") + e.what());
  }
  return c;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' must look like key.path=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (key.empty()) throw ConfigError("override '" + assignment + "' has an empty key");
    if (!node->is_object()) *node = json::object();
    if (dot == std::string::npos) {
      (*node)[key] = std::move(value);
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

PipelineConfig load_pipeline_config(const std::optional<fs::path>& file,
                                    const std::vector<std::string>& overrides) {
  json doc = json::object();
  fs::path base = fs::current_path();
  if (file) {
    std::ifstream in(*file);
    if (!in) throw ConfigError("config file " + file->string() + " cannot be opened");
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("config file " + file->string() + ": " + e.what());
    }
    base = fs::absolute(*file).parent_path();
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return pipeline_config_from_json(doc, base);
}

}  // namespace care::pipeline
