#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace care {

/// Word-level hashing tokenizer for the bundled tiny backbone. The literal
/// "[SEP]" maps to the separator id; words hash into [kFirstWordId, vocab).
class Tokenizer {
 public:
  static constexpr int kPadId = 0;
  static constexpr int kSepId = 1;
  static constexpr int kFirstWordId = 2;

  explicit Tokenizer(std::size_t vocab_size = 4096);

  std::vector<int> encode(const std::string& text) const;
  std::size_t vocab_size() const noexcept { return vocab_size_; }

 private:
  std::size_t vocab_size_;
};

}  // namespace care
