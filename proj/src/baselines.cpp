#include "care/baselines.hpp"

#include <atomic>
#include <regex>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "care/errors.hpp"
#include "care/hashing.hpp"

namespace care {

using nlohmann::json;

std::string_view to_key(BaselineMode m) noexcept {
  return m == BaselineMode::ZeroShot ? "zero_shot" : "few_shot";
}

BaselineMode baseline_mode_from_key(std::string_view key) {
  if (key == "zero_shot" || key == "zero-shot") return BaselineMode::ZeroShot;
  if (key == "few_shot" || key == "few-shot") return BaselineMode::FewShot;
  throw ConfigError("baseline mode must be zero_shot|few_shot, got '" + std::string(key) + "'");
}

bool ScoreLine::any_clamped() const noexcept {
  for (bool c : clamped) {
    if (c) return true;
  }
  return false;
}

namespace {

struct KeyNames {
  std::string_view full, shortname, abbrev;
  const char* pattern;
};

// Patterns accept every name variant of a dimension.
constexpr std::array<KeyNames, kNumDimensions> kKeys = {{
    {"Non-Judgmental", "Non-Judgmental", "NJ",
     R"(non[- ]?judg(?:e)?mental(?:\s+language)?|nj)"},
    {"Warmth", "Warmth", "W", R"(warmth(?:\s+and\s+encouragement)?|w)"},
    {"Respect", "Respect", "RA", R"(respect(?:\s+for\s+autonomy)?|ra)"},
    {"Active Listening", "Active", "AL", R"(active(?:\s+listening)?|al)"},
    {"Reflecting Feelings", "Reflecting", "RF", R"(reflecting(?:\s+feelings)?|rf)"},
    {"Situational Appropriateness", "Situational", "SA",
     R"(situational(?:\s+appropriateness)?|sa)"},
}};

const std::array<std::regex, kNumDimensions>& key_regexes() {
  static const auto res = [] {
    std::array<std::regex, kNumDimensions> out;
    for (std::size_t d = 0; d < kNumDimensions; ++d) {
      out[d] = std::regex(std::string(R"((?:^|[^A-Za-z])(?:)") + kKeys[d].pattern +
                              R"()\s*[:=]\s*\*{0,2}\s*([+-]?\d+))",
                          std::regex::icase | std::regex::ECMAScript);
    }
    return out;
  }();
  return res;
}

}  // namespace

std::string render_score_line(const Labels& labels, ScoreLineStyle style) {
  std::string out;
  for (std::size_t d = 0; d < kNumDimensions; ++d) {
    const auto& k = kKeys[d];
    const auto name = style == ScoreLineStyle::Full    ? k.full
                      : style == ScoreLineStyle::Short ? k.shortname
                                                       : k.abbrev;
    if (d > 0) out += ", ";
    out += fmt::format("{}: {}", name, labels[d]);
  }
  return out;
}

ScoreLine parse_score_line(const std::string& text) {
  ScoreLine line;
  line.raw_text = text;
  std::vector<std::string_view> missing;
  const auto& res = key_regexes();
  for (std::size_t d = 0; d < kNumDimensions; ++d) {
    std::optional<long> value;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), res[d]);
         it != std::sregex_iterator(); ++it) {
      try {
        value = std::stol((*it)[1].str());
      } catch (const std::out_of_range&) {
        value = (*it)[1].str().front() == '-' ? kMinLabel - 1 : kMaxLabel + 1;
      }
    }
    if (!value) {
      missing.push_back(to_key(kAllDimensions[d]));
      continue;
    }
    long v = *value;
    if (v < kMinLabel || v > kMaxLabel) {
      v = std::clamp<long>(v, kMinLabel, kMaxLabel);
      line.clamped[d] = true;
    }
    line.labels[d] = static_cast<int>(v);
  }
  if (!missing.empty()) {
    throw ScoreParseFailure(fmt::format("score line lacks {}", fmt::join(missing, ", ")));
  }
  return line;
}

std::vector<Demonstration> default_demonstrations() {
  Demonstration a;
  a.therapist_text = "So you have difficulty falling asleep. But once you fall asleep.";
  a.explanations = {
      "Non-judgmental language in therapy is essential for creating a safe and supportive "
      "environment where clients feel comfortable sharing their experiences without fear of "
      "criticism.",
      "Warmth and encouragement in therapy create a safe space for clients to explore their "
      "feelings and challenges.",
      "Respect for autonomy emphasizes recognizing the client’s ability to make their own "
      "decisions regarding their mental health.",
      "Active listening involves fully concentrating on the client’s words and "
      "demonstrating understanding.",
      "Reflecting feelings acknowledges the client’s emotional experience by summarizing "
      "their struggle with sleep difficulties.",
      "The therapist response appropriately addresses a common clinical concern raised by the "
      "client.",
  };
  a.scores = {2, 1, 1, 2, 1, 2};

  Demonstration b;
  b.therapist_text = "What County are we in?";
  b.explanations = {
      "The response does not express judgment and maintains neutrality.",
      "The question provides limited warmth and encouragement.",
      "The response does not restrict the client’s autonomy.",
      "The response demonstrates minimal engagement with the client’s expressed concerns.",
      "The question serves as a grounding technique rather than emotional reflection.",
      "The response is weakly appropriate as it diverts attention from the client’s "
      "emotional needs.",
  };
  b.scores = {1, 0, 1, 1, 1, 1};
  return {a, b};
}

std::string compose_zero_shot_prompt(const std::string& patient_text,
                                     const std::string& therapist_text) {
  if (therapist_text.empty()) throw EmptyTargetError("zero-shot prompt needs a therapist utterance");
  return fmt::format(
      "You are a mental health evaluation assistant trained in psychotherapy communication "
      "techniques.\n"
      "Please assess the quality of the therapist's response using the following six "
      "therapeutic dimensions. Use the preceding patient's statement to help you understand "
      "the context and appropriateness of the therapist's message.\n"
      "\n"
      "Patient said: \"{}\"\n"
      "Therapist responded: \"{}\"\n"
      "\n"
      "Rate the therapist's response from -2 to +2 for each dimension:\n"
      "- -2 = strongly violates the principle\n"
      "-  0 = neutral or unclear\n"
      "- +2 = strongly demonstrates the principle\n"
      "\n"
      "Output Format (verbatim):\n"
      "Non-Judgmental: X, Warmth: X, Respect: X, Active Listening: X, Reflecting Feelings: X, "
      "Situational Appropriateness: X\n",
      patient_text, therapist_text);
}

std::string compose_few_shot_prompt(std::span<const Demonstration> demonstrations,
                                    const std::string& patient_text,
                                    const std::string& therapist_text) {
  if (demonstrations.empty()) {
    throw EmptyDemonstrationError("few-shot prompt needs at least one demonstration");
  }
  if (therapist_text.empty()) throw EmptyTargetError("few-shot prompt needs a therapist utterance");
  std::string out =
      "You are an expert in mental health counselling. Evaluate each therapist's response on "
      "a scale from -2 to +2 based on the following six therapeutic principles:\n\n";
  for (std::size_t d = 0; d < kNumDimensions; ++d) {
    out += display_name(kAllDimensions[d]);
    out += d + 1 < kNumDimensions ? ";\n" : ".\n";
  }
  out +=
      "\nUse the reference examples below to guide your judgment. Each example includes a "
      "therapist response, detailed explanations for each principle, and final scores. Follow "
      "the same reasoning pattern when evaluating the new response.\n";

  auto render_dialogue = [&](const std::string& patient, const std::string& therapist) {
    if (!patient.empty()) out += fmt::format("\nPatient Statement:\n\"{}\"\n", patient);
    out += fmt::format("\nTherapist Response:\n\"{}\"\n", therapist);
  };
  for (std::size_t i = 0; i < demonstrations.size(); ++i) {
    const auto& demo = demonstrations[i];
    // Examples are lettered A, B, ... and numbered past Z.
    const std::string tag = i < 26 ? std::string(1, static_cast<char>('A' + i))
                                   : std::to_string(i + 1);
    out += fmt::format("\nExample {}\n", tag);
    render_dialogue(demo.patient_text, demo.therapist_text);
    out += "\nExplanations:\n";
    for (std::size_t d = 0; d < kNumDimensions; ++d) {
      out += fmt::format("{}: {}\n", display_name(kAllDimensions[d]), demo.explanations[d]);
    }
    out += "\nScores:\n" + render_score_line(demo.scores, ScoreLineStyle::Short) + "\n";
  }
  out += "\nNow evaluate this response:\n";
  render_dialogue(patient_text, therapist_text);
  out += "\nReturn scores in same format.\n";
  return out;
}

BaselineResult run_prompt_baseline(std::span<const BaselineInstance> instances,
                                   TeacherClient& client, JsonlCache& cache,
                                   const BaselineOptions& options) {
  BaselineResult result;
  result.records.resize(instances.size());
  std::vector<std::exception_ptr> errors(instances.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> calls{0};
  const std::string client_id = client.id();

  auto work = [&](std::size_t i) {
    const auto& inst = instances[i];
    auto& rec = result.records[i];
    rec.utterance_id = inst.utterance_id;
    rec.checkpoint = client_id;
    rec.config_fingerprint = options.config_fingerprint;
    rec.corpus_fingerprint = options.corpus_fingerprint;
    rec.extra = {{"mode", to_key(options.mode)}, {"client_id", client_id}};

    const std::string prompt =
        options.mode == BaselineMode::ZeroShot
            ? compose_zero_shot_prompt(inst.patient_text, inst.therapist_text)
            : compose_few_shot_prompt(options.demonstrations, inst.patient_text,
                                      inst.therapist_text);
    const std::string hash = sha256_hex(std::string(kBaselineTemplateVersion) + '\n' + prompt);
    const json key = {{"prompt_hash", hash}, {"client_id", client_id}};
    std::string completion;
    if (auto hit = cache.get(key)) {
      completion = hit->at("text").get<std::string>();
    } else {
      ++calls;
      const auto res =
          complete_with_retries(client, prompt, options.decoding, options.retry);
      if (!res.text) {
        spdlog::warn("baseline client failed for {}: {}", inst.utterance_id, res.last_error);
        rec.extra["parse_status"] = "client_failure";
        return;
      }
      completion = *res.text;
      cache.put({{"key", key}, {"text", completion}, {"utterance_id", inst.utterance_id}});
    }
    try {
      const ScoreLine line = parse_score_line(completion);
      rec.scores = degenerate_scores(line.labels);
      rec.extra["parse_status"] = line.any_clamped() ? "clamped" : "ok";
    } catch (const ScoreParseFailure& e) {
      rec.extra["parse_status"] = "parse_failure";
      rec.extra["parse_error"] = e.what();
    }
  };

  {
    const std::size_t workers =
        std::max<std::size_t>(1, std::min(options.parallelism, instances.size()));
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < instances.size(); i = next++) {
          try {
            work(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  for (const auto& rec : result.records) {
    if (!rec.scored()) result.unscored_ids.push_back(rec.utterance_id);
  }
  result.client_calls = calls.load();
  return result;
}

}  // namespace care
