#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace care {

/// Append-only on-disk key/value store: one JSON object per line in
/// <dir>/<journal>. Each entry carries its key object under "key"; the first
/// entry stored for a key wins. Single writer (internally serialized),
/// many readers.
class JsonlCache {
 public:
  explicit JsonlCache(std::filesystem::path dir,
                      std::string journal_name = "journal.jsonl");

  JsonlCache(const JsonlCache&) = delete;
  JsonlCache& operator=(const JsonlCache&) = delete;

  std::optional<nlohmann::json> get(const nlohmann::json& key) const;

  /// Appends entry (which must contain "key") unless the key is already
  /// present. Returns true when stored. Throws CacheIOError.
  bool put(const nlohmann::json& entry);

  std::size_t size() const;
  std::vector<nlohmann::json> entries() const;  // ordered by key

  /// Rewrites the journal with one line per key.
  void compact();

  const std::filesystem::path& journal_path() const noexcept { return journal_; }

 private:
  void load();

  std::filesystem::path journal_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, nlohmann::json> entries_;
};

}  // namespace care
