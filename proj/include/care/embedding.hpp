#pragma once

// Sentence embedding providers used for exemplar retrieval.

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace care {

/// embed() must be safe to call from several threads at once.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string id() const = 0;
  virtual std::size_t dimension() const = 0;
  /// One vector of length dimension() per input text. Throws ProviderError.
  virtual std::vector<std::vector<float>> embed(
      const std::vector<std::string>& texts) = 0;
};

/// Offline, deterministic provider: signed feature hashing of lowercased word
/// unigrams and bigrams plus a constant bias feature, L2-normalized.
class HashingEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit HashingEmbeddingProvider(std::size_t dimension = 64);
  std::string id() const override;
  std::size_t dimension() const override { return dim_; }
  std::vector<std::vector<float>> embed(
      const std::vector<std::string>& texts) override;

 private:
  std::size_t dim_;
};

struct HttpEndpoint {
  std::string base_url;  // scheme://host[:port]
  std::string path;
  std::string api_key;   // sent as a bearer token when non-empty
  int timeout_seconds = 60;
};

/// Sentence-encoder service speaking the OpenAI-compatible embeddings API
/// (POST {"model", "input": [...]} -> {"data": [{"embedding": [...]}, ...]}).
class HttpEmbeddingProvider final : public EmbeddingProvider {
 public:
  HttpEmbeddingProvider(HttpEndpoint endpoint, std::string model,
                        std::size_t dimension);
  std::string id() const override { return "http:" + model_; }
  std::size_t dimension() const override { return dim_; }
  std::vector<std::vector<float>> embed(
      const std::vector<std::string>& texts) override;

 private:
  HttpEndpoint endpoint_;
  std::string model_;
  std::size_t dim_;
};

/// "hash" | "hash:<dim>" | "http:<model>@<base_url>#<dim>".
/// API credentials for http come from CARE_API_KEY.
std::unique_ptr<EmbeddingProvider> make_embedding_provider(const std::string& spec);

/// Scales v to unit L2 norm; a zero vector is left unchanged.
void normalize(std::vector<float>& v);

double cosine_similarity(std::span<const float> a, std::span<const float> b);

/// Lowercased alphanumeric word tokens (apostrophes kept inside words).
std::vector<std::string> word_tokens(const std::string& text);

}  // namespace care
