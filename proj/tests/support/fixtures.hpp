#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "care/corpus.hpp"

namespace fixture {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "care") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline care::Utterance utt(const std::string& session, int turn, care::Speaker speaker,
                           const std::string& text) {
  return {session, turn, speaker, text, session + "_" + std::to_string(turn)};
}

inline care::Labels uniform_labels(int v) { return {v, v, v, v, v, v}; }

/// Random corpus with `sessions` sessions of random length and speakers;
/// every therapist turn is annotated with random labels.
inline care::Corpus random_corpus(std::mt19937_64& gen, std::size_t sessions,
                                  std::size_t max_turns = 8) {
  std::vector<care::Utterance> utts;
  std::vector<care::AnnotationRecord> anns;
  std::uniform_int_distribution<int> label(-2, 2);
  for (std::size_t s = 0; s < sessions; ++s) {
    const std::string sid = "R" + std::to_string(1000 + s);
    const auto turns = 1 + gen() % max_turns;
    for (std::size_t t = 0; t < turns; ++t) {
      const auto speaker = gen() % 2 ? care::Speaker::Therapist : care::Speaker::Patient;
      auto u = utt(sid, static_cast<int>(t), speaker,
                   "turn " + std::to_string(t) + " of " + sid);
      if (speaker == care::Speaker::Therapist) {
        care::Labels l{};
        for (auto& v : l) v = label(gen);
        anns.push_back({u.utterance_id, l});
      }
      utts.push_back(std::move(u));
    }
  }
  return care::Corpus::build(std::move(utts), std::move(anns));
}

}  // namespace fixture
