#include "care/teacher.hpp"

#include <array>
#include <thread>

#include <fmt/format.h>

#include "care/errors.hpp"
#include "care/hashing.hpp"
#include "care/http_client.hpp"

namespace care {

namespace {

std::string extract_between(const std::string& text, std::string_view start,
                            std::string_view stop) {
  const auto a = text.find(start);
  if (a == std::string::npos) return {};
  const auto from = a + start.size();
  const auto b = text.find(stop, from);
  return text.substr(from, b == std::string::npos ? std::string::npos : b - from);
}

constexpr std::array<std::string_view, 4> kClosings = {
    "The response shows how closely the counselor follows the client.",
    "The wording signals the stance the counselor takes toward the client.",
    "The phrasing shapes whether the client feels heard and supported.",
    "The reply sets the tone for what the client may share next.",
};

std::string synthesize(const std::string& prompt) {
  const std::uint64_t h = mix64(fnv1a64(prompt));
  const auto dimension =
      extract_between(prompt, "develop a detailed explanation for ", ".");
  if (!dimension.empty()) {
    const auto target =
        extract_between(prompt, "Therapist Current Utterance: ", "\n");
    return fmt::format("{}: the therapist says \"{}\". {}", dimension, target,
                       kClosings[h % kClosings.size()]);
  }
  if (prompt.find("Non-Judgmental") != std::string::npos) {
    std::array<int, 6> s{};
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = static_cast<int>((h >> (i * 8)) % 5) - 2;
    }
    return fmt::format(
        "Non-Judgmental: {}, Warmth: {}, Respect: {}, Active Listening: {}, "
        "Reflecting Feelings: {}, Situational Appropriateness: {}",
        s[0], s[1], s[2], s[3], s[4], s[5]);
  }
  return fmt::format("response-{:016x}", h);
}

}  // namespace

MockTeacher::MockTeacher(Mode mode, std::string fixed_text, std::string id)
    : mode_(mode), fixed_text_(std::move(fixed_text)), id_(std::move(id)) {}

std::string MockTeacher::complete(const std::string& prompt,
                                  const DecodingParams& /*params*/) {
  ++calls_;
  switch (mode_) {
    case Mode::Fixed: return fixed_text_;
    case Mode::AlwaysFail: throw TeacherError("mock teacher configured to fail");
    case Mode::Synthesize: return synthesize(prompt);
  }
  return {};
}

HttpTeacher::HttpTeacher(HttpEndpoint endpoint, std::string model)
    : endpoint_(std::move(endpoint)), model_(std::move(model)) {}

std::string HttpTeacher::complete(const std::string& prompt,
                                  const DecodingParams& params) {
  nlohmann::json body = {
      {"model", model_},
      {"messages", {{{"role", "user"}, {"content", prompt}}}},
      {"temperature", params.temperature},
      {"max_tokens", params.max_tokens},
  };
  nlohmann::json response;
  try {
    response = http_post_json(endpoint_, body);
  } catch (const ProviderError& e) {
    throw TeacherError(e.what());
  }
  try {
    return response.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw TeacherError("chat completion response has no message content");
  }
}

CompletionResult complete_with_retries(TeacherClient& client,
                                       const std::string& prompt,
                                       const DecodingParams& params,
                                       const RetryPolicy& policy) {
  CompletionResult result;
  auto delay = policy.base_delay;
  for (int attempt = 0; attempt <= policy.max_retries; ++attempt) {
    if (attempt > 0) {
      if (policy.sleep) {
        policy.sleep(delay);
      } else {
        std::this_thread::sleep_for(delay);
      }
      delay *= 2;
    }
    ++result.attempts;
    try {
      result.text = client.complete(prompt, params);
      return result;
    } catch (const std::exception& e) {
      result.last_error = e.what();
    }
  }
  return result;
}

std::unique_ptr<TeacherClient> make_teacher(const std::string& spec) {
  if (spec == "mock") return std::make_unique<MockTeacher>();
  if (spec == "mock:fail") {
    return std::make_unique<MockTeacher>(MockTeacher::Mode::AlwaysFail, "",
                                         "mock-failing");
  }
  if (spec.starts_with("mock:fixed:")) {
    return std::make_unique<MockTeacher>(MockTeacher::Mode::Fixed, spec.substr(11),
                                         "mock-fixed");
  }
  if (spec.starts_with("openai:")) {
    const auto at = spec.find('@');
    if (at == std::string::npos) {
      throw ConfigError("teacher spec must be openai:<model>@<base_url>");
    }
    HttpEndpoint ep{spec.substr(at + 1), "/v1/chat/completions", api_key_from_env(),
                    120};
    return std::make_unique<HttpTeacher>(std::move(ep), spec.substr(7, at - 7));
  }
  throw ConfigError("unknown teacher '" + spec + "'");
}

}  // namespace care
