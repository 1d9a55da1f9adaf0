#include "care/embedding.hpp"

#include <cctype>
#include <cmath>

#include <fmt/format.h>

#include "care/errors.hpp"
#include "care/hashing.hpp"
#include "care/http_client.hpp"

namespace care {

std::vector<std::string> word_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c) || (c == '\'' && !cur.empty()) || c >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

void normalize(std::vector<float>& v) {
  double sq = 0.0;
  for (float x : v) sq += static_cast<double>(x) * x;
  if (sq <= 0.0) return;
  const double inv = 1.0 / std::sqrt(sq);
  for (float& x : v) x = static_cast<float>(x * inv);
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw ShapeMismatchError("cosine_similarity: dimension mismatch");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// ---------------------------------------------------------------------------

HashingEmbeddingProvider::HashingEmbeddingProvider(std::size_t dimension)
    : dim_(dimension) {
  if (dim_ == 0) throw ConfigError("embedding dimension must be positive");
}

std::string HashingEmbeddingProvider::id() const {
  return fmt::format("hash-bow:{}", dim_);
}

std::vector<std::vector<float>> HashingEmbeddingProvider::embed(
    const std::vector<std::string>& texts) {
  std::vector<std::vector<float>> out;
  out.reserve(texts.size());
  for (const auto& text : texts) {
    std::vector<float> v(dim_, 0.0f);
    auto add = [&](std::string_view feature, float weight) {
      const std::uint64_t h = mix64(fnv1a64(feature));
      const float sign = (h >> 63) != 0 ? -1.0f : 1.0f;
      v[h % dim_] += sign * weight;
    };
    add("<bias>", 0.25f);
    const auto words = word_tokens(text);
    for (std::size_t i = 0; i < words.size(); ++i) {
      add(words[i], 1.0f);
      if (i + 1 < words.size()) add(words[i] + ' ' + words[i + 1], 0.5f);
    }
    normalize(v);
    out.push_back(std::move(v));
  }
  return out;
}

// ---------------------------------------------------------------------------

HttpEmbeddingProvider::HttpEmbeddingProvider(HttpEndpoint endpoint,
                                             std::string model,
                                             std::size_t dimension)
    : endpoint_(std::move(endpoint)), model_(std::move(model)), dim_(dimension) {}

std::vector<std::vector<float>> HttpEmbeddingProvider::embed(
    const std::vector<std::string>& texts) {
  if (texts.empty()) return {};
  const auto response =
      http_post_json(endpoint_, {{"model", model_}, {"input", texts}});
  if (!response.contains("data") || !response["data"].is_array() ||
      response["data"].size() != texts.size()) {
    throw ProviderError("embedding response must carry one item per input");
  }
  std::vector<std::vector<float>> out(texts.size());
  for (const auto& item : response["data"]) {
    const std::size_t idx =
        item.contains("index") ? item["index"].get<std::size_t>() : 0;
    if (idx >= texts.size() || !item.contains("embedding")) {
      throw ProviderError("embedding response item is malformed");
    }
    auto v = item["embedding"].get<std::vector<float>>();
    if (v.size() != dim_) {
      throw ProviderError(fmt::format("embedding has width {}, expected {}",
                                      v.size(), dim_));
    }
    out[idx] = std::move(v);
  }
  for (const auto& v : out) {
    if (v.empty()) throw ProviderError("embedding response is missing an index");
  }
  return out;
}

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const std::string& spec) {
  if (spec == "hash") return std::make_unique<HashingEmbeddingProvider>();
  if (spec.starts_with("hash:")) {
    return std::make_unique<HashingEmbeddingProvider>(std::stoul(spec.substr(5)));
  }
  if (spec.starts_with("http:")) {
    // http:<model>@<base_url>#<dim>
    const auto at = spec.find('@');
    const auto hash = spec.rfind('#');
    if (at == std::string::npos || hash == std::string::npos || hash < at) {
      throw ConfigError("embedding provider spec must be http:<model>@<url>#<dim>");
    }
    HttpEndpoint ep{spec.substr(at + 1, hash - at - 1), "/v1/embeddings",
                    api_key_from_env(), 60};
    return std::make_unique<HttpEmbeddingProvider>(
        std::move(ep), spec.substr(5, at - 5), std::stoul(spec.substr(hash + 1)));
  }
  throw ConfigError("unknown embedding provider '" + spec + "'");
}

}  // namespace care
