#pragma once

// Pluggable text-completion backends: the rationale teacher and the
// prompt-baseline evaluators share this interface.

#include <atomic>
#include <chrono>
#include <functional>
#include <optional>
#include <cstddef>
#include <memory>
#include <string>

#include "care/embedding.hpp"

namespace care {

struct DecodingParams {
  double temperature = 0.0;
  int max_tokens = 512;
};

/// complete() throws TeacherError on any backend failure and must be safe to
/// call concurrently.
class TeacherClient {
 public:
  virtual ~TeacherClient() = default;
  virtual std::string id() const = 0;
  virtual std::string complete(const std::string& prompt,
                               const DecodingParams& params) = 0;
};

/// Deterministic offline backend. In Synthesize mode the reply is a pure
/// function of the prompt: rationale prompts get an explanation quoting the
/// target utterance; scoring prompts get a score line derived from a hash of
/// the prompt.
class MockTeacher final : public TeacherClient {
 public:
  enum class Mode { Synthesize, Fixed, AlwaysFail };

  explicit MockTeacher(Mode mode = Mode::Synthesize, std::string fixed_text = {},
                       std::string id = "mock-teacher");

  std::string id() const override { return id_; }
  std::string complete(const std::string& prompt,
                       const DecodingParams& params) override;

  /// Attempts observed so far, failed ones included.
  std::size_t calls() const noexcept { return calls_.load(); }

 private:
  Mode mode_;
  std::string fixed_text_;
  std::string id_;
  std::atomic<std::size_t> calls_{0};
};

/// OpenAI-compatible chat-completions backend.
class HttpTeacher final : public TeacherClient {
 public:
  HttpTeacher(HttpEndpoint endpoint, std::string model);
  std::string id() const override { return "openai:" + model_; }
  std::string complete(const std::string& prompt,
                       const DecodingParams& params) override;

 private:
  HttpEndpoint endpoint_;
  std::string model_;
};

/// Retries default to 3 with exponential backoff 1s, 2s, 4s.
struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds base_delay{1000};
  /// Injected for tests; defaults to std::this_thread::sleep_for.
  std::function<void(std::chrono::milliseconds)> sleep;
};

struct CompletionResult {
  std::optional<std::string> text;  // empty after exhausting retries
  int attempts = 0;
  std::string last_error;
};

/// Never throws for backend failures; they are reported in the result.
CompletionResult complete_with_retries(TeacherClient& client,
                                       const std::string& prompt,
                                       const DecodingParams& params,
                                       const RetryPolicy& policy);

/// "mock" | "mock:fixed:<text>" | "mock:fail" | "openai:<model>@<base_url>".
/// Remote credentials come from CARE_API_KEY.
std::unique_ptr<TeacherClient> make_teacher(const std::string& spec);

}  // namespace care
