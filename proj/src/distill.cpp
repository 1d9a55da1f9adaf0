#include "care/distill.hpp"

#include <atomic>
#include <chrono>
#include <ctime>
#include <istream>
#include <mutex>
#include <ostream>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "care/errors.hpp"
#include "care/hashing.hpp"

namespace care {

using nlohmann::json;

std::string_view to_key(PolarityMode m) noexcept {
  switch (m) {
    case PolarityMode::Both: return "both";
    case PolarityMode::PositiveOnly: return "positive";
    case PolarityMode::NegativeOnly: return "negative";
  }
  return "both";
}

PolarityMode polarity_mode_from_key(std::string_view key) {
  if (key == "both") return PolarityMode::Both;
  if (key == "positive") return PolarityMode::PositiveOnly;
  if (key == "negative") return PolarityMode::NegativeOnly;
  throw ConfigError("polarity mode must be both|positive|negative, got '" +
                    std::string(key) + "'");
}

RationalePrompt compose_rationale_prompt(std::span<const ScoredExemplar> exemplars,
                                         const QueryPair& target, Dimension dimension) {
  if (target.therapist_text.empty()) {
    throw EmptyTargetError("rationale prompt needs a non-empty therapist utterance");
  }
  RationalePrompt p;
  p.text = fmt::format(
      "Instruction: I need you to think like a mental health counselor and use a "
      "hidden chain-of-thought process. I will provide you with a therapist "
      "dialogue along with several reference dialogues. First, internally analyze "
      "and understand the reference dialogues to build expert knowledge. Then, "
      "using your hidden chain-of-thought reasoning, analyze the therapist "
      "dialogue and develop a detailed explanation for {}. Finally, provide your "
      "explanation in exactly 100 words. Do not include any of your internal "
      "reasoning in the final output.\n\n"
      "Label Exclusive Utterances:",
      display_name(dimension));
  for (std::size_t i = 0; i < exemplars.size(); ++i) {
    p.text += i == 0 ? " " : "\n";
    p.text += exemplars[i].exemplar->therapist_text;
    p.exemplar_ids.push_back(exemplars[i].exemplar->source_utterance_id);
  }
  p.text += "\n\nTherapist Current Utterance: ";
  p.text += target.therapist_text;
  p.text += '\n';
  p.no_exemplars = exemplars.empty();
  p.hash = sha256_hex(std::string(kRationaleTemplateVersion) + '\n' + p.text);
  if (p.no_exemplars) {
    spdlog::warn("rationale prompt for {} has no label-exclusive exemplars",
                 to_key(dimension));
  }
  return p;
}

namespace {

std::string_view to_key(RationaleStatus s) {
  return s == RationaleStatus::Ok ? "OK" : "FALLBACK_EMPTY";
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json cache_key(const std::string& utterance_id, Dimension d,
               const std::string& teacher_id, const std::string& prompt_hash) {
  return json{{"utterance_id", utterance_id},
              {"dimension", to_key(d)},
              {"teacher_id", teacher_id},
              {"prompt_hash", prompt_hash}};
}

}  // namespace

json to_json(const Rationale& r) {
  return json{{"key", cache_key(r.utterance_id, r.dimension, r.teacher_id, r.prompt_hash)},
              {"text", r.text},
              {"status", to_key(r.status)},
              {"created_at", r.created_at},
              {"exemplars", r.exemplar_ids}};
}

Rationale rationale_from_json(const json& j) {
  try {
    Rationale r;
    const auto& key = j.at("key");
    r.utterance_id = key.at("utterance_id").get<std::string>();
    auto dim = dimension_from_key(key.at("dimension").get<std::string>());
    if (!dim) throw ParseError("unknown dimension in rationale");
    r.dimension = *dim;
    r.teacher_id = key.at("teacher_id").get<std::string>();
    r.prompt_hash = key.at("prompt_hash").get<std::string>();
    r.text = j.at("text").get<std::string>();
    const auto status = j.at("status").get<std::string>();
    if (status == "OK") {
      r.status = RationaleStatus::Ok;
    } else if (status == "FALLBACK_EMPTY") {
      r.status = RationaleStatus::FallbackEmpty;
    } else {
      throw ParseError("unknown rationale status '" + status + "'");
    }
    r.created_at = j.value("created_at", "");
    if (j.contains("exemplars")) r.exemplar_ids = j["exemplars"].get<std::vector<std::string>>();
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed rationale entry: ") + e.what());
  }
}

std::optional<Rationale> RationaleCache::find(const std::string& utterance_id,
                                              Dimension d,
                                              const std::string& teacher_id,
                                              const std::string& prompt_hash) const {
  auto entry = store_.get(cache_key(utterance_id, d, teacher_id, prompt_hash));
  if (!entry) return std::nullopt;
  return rationale_from_json(*entry);
}

void RationaleCache::store(const Rationale& r) { store_.put(to_json(r)); }

Rationale generate_rationale(const RationalePrompt& prompt, Dimension dimension,
                             const std::string& utterance_id, TeacherClient& teacher,
                             RationaleCache& cache, const RetryPolicy& retry,
                             const DecodingParams& decoding) {
  const auto teacher_id = teacher.id();
  if (auto hit = cache.find(utterance_id, dimension, teacher_id, prompt.hash)) {
    return *hit;
  }
  Rationale r;
  r.utterance_id = utterance_id;
  r.dimension = dimension;
  r.teacher_id = teacher_id;
  r.prompt_hash = prompt.hash;
  r.created_at = utc_now();
  r.exemplar_ids = prompt.exemplar_ids;
  auto result = complete_with_retries(teacher, prompt.text, decoding, retry);
  if (result.text) {
    r.text = std::move(*result.text);
    r.status = RationaleStatus::Ok;
  } else {
    r.status = RationaleStatus::FallbackEmpty;
    spdlog::warn("teacher '{}' failed {} times for ({}, {}); storing FALLBACK_EMPTY: {}",
                 teacher_id, result.attempts, utterance_id, to_key(dimension),
                 result.last_error);
  }
  cache.store(r);
  // Another writer may have stored the key first; the cache is the source of truth.
  if (auto stored = cache.find(utterance_id, dimension, teacher_id, prompt.hash)) {
    return *stored;
  }
  return r;
}

std::size_t CoverageSummary::total() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < kNumDimensions; ++i) n += ok[i] + fallback[i];
  return n;
}

json to_json(const CoverageSummary& s) {
  json dims = json::object();
  for (Dimension d : kAllDimensions) {
    const auto i = dimension_index(d);
    dims[std::string(to_key(d))] = {{"ok", s.ok[i]}, {"fallback", s.fallback[i]}};
  }
  return json{{"per_dimension", dims},
              {"total", s.total()},
              {"empty_exemplar_prompts", s.empty_exemplar_prompts}};
}

const Rationale* RationaleSet::find(const std::string& utterance_id, Dimension d) const {
  for (const auto& r : rationales) {
    if (r.utterance_id == utterance_id && r.dimension == d) return &r;
  }
  return nullptr;
}

RationaleSet batch_distill(std::span<const DistillInstance> instances,
                           const ExemplarPools& pools, EmbeddingProvider& provider,
                           TeacherClient& teacher, RationaleCache& cache,
                           const DistillConfig& config) {
  RationaleSet set;
  if (instances.empty()) return set;
  if (provider.id() != pools.provider_id()) {
    throw ProviderError("index was built with provider '" + pools.provider_id() +
                        "' but distillation uses '" + provider.id() + "'");
  }
  const std::size_t num_dims = config.dimensions.size();
  const std::size_t total = instances.size() * num_dims;
  set.rationales.resize(total);
  std::vector<char> empty_prompt(total, 0);

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;

  auto worker = [&] {
    for (;;) {
      const std::size_t job = next.fetch_add(1);
      if (job >= instances.size()) return;
      const auto& inst = instances[job];
      try {
        const auto query = embed_query(inst.query, provider);
        for (std::size_t di = 0; di < num_dims; ++di) {
          const Dimension d = config.dimensions[di];
          std::vector<ScoredExemplar> exemplars;
          if (config.polarity != PolarityMode::NegativeOnly) {
            auto pos = retrieve(query, pools.pool(d, Polarity::Positive), config.top_n);
            exemplars.insert(exemplars.end(), pos.begin(), pos.end());
          }
          if (config.polarity != PolarityMode::PositiveOnly) {
            auto neg = retrieve(query, pools.pool(d, Polarity::Negative), config.top_n);
            exemplars.insert(exemplars.end(), neg.begin(), neg.end());
          }
          const auto prompt = compose_rationale_prompt(exemplars, inst.query, d);
          empty_prompt[job * num_dims + di] = prompt.no_exemplars;
          set.rationales[job * num_dims + di] = generate_rationale(
              prompt, d, inst.utterance_id, teacher, cache, config.retry,
              config.decoding);
        }
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  const std::size_t threads =
      std::min(std::max<std::size_t>(1, config.parallelism), instances.size());
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  // Teacher failures never reach here; only structural problems (provider,
  // cache I/O, empty targets) abort the batch.
  if (first_error) std::rethrow_exception(first_error);

  for (std::size_t i = 0; i < total; ++i) {
    const auto& r = set.rationales[i];
    const auto d = dimension_index(r.dimension);
    if (r.status == RationaleStatus::Ok) {
      ++set.summary.ok[d];
    } else {
      ++set.summary.fallback[d];
    }
    set.summary.empty_exemplar_prompts += empty_prompt[i] ? 1 : 0;
  }
  return set;
}

void write_rationales(const RationaleSet& set, std::ostream& out) {
  for (const auto& r : set.rationales) out << to_json(r).dump() << '\n';
}

RationaleSet read_rationales(std::istream& in) {
  RationaleSet set;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      set.rationales.push_back(rationale_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("rationale file: ") + e.what());
    }
    const auto& r = set.rationales.back();
    auto& bucket = r.status == RationaleStatus::Ok ? set.summary.ok : set.summary.fallback;
    ++bucket[dimension_index(r.dimension)];
  }
  return set;
}

}  // namespace care
