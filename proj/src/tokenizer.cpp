#include "care/tokenizer.hpp"

#include "care/embedding.hpp"
#include "care/errors.hpp"
#include "care/hashing.hpp"

namespace care {

Tokenizer::Tokenizer(std::size_t vocab_size) : vocab_size_(vocab_size) {
  if (vocab_size_ <= static_cast<std::size_t>(kFirstWordId)) {
    throw ConfigError("tokenizer vocabulary is too small");
  }
}

std::vector<int> Tokenizer::encode(const std::string& text) const {
  static constexpr std::string_view kSep = "[SEP]";
  std::vector<int> ids;
  const auto buckets = vocab_size_ - kFirstWordId;
  std::size_t start = 0;
  for (;;) {
    const auto sep = text.find(kSep, start);
    const auto piece = text.substr(start, sep == std::string::npos ? std::string::npos
                                                                   : sep - start);
    for (const auto& w : word_tokens(piece)) {
      ids.push_back(kFirstWordId + static_cast<int>(mix64(fnv1a64(w)) % buckets));
    }
    if (sep == std::string::npos) break;
    ids.push_back(kSepId);
    start = sep + kSep.size();
  }
  return ids;
}

}  // namespace care
