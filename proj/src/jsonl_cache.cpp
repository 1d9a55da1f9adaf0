#include "care/jsonl_cache.hpp"

#include <fstream>

#include <spdlog/spdlog.h>

#include "care/errors.hpp"

namespace care {

using nlohmann::json;

JsonlCache::JsonlCache(std::filesystem::path dir, std::string journal_name) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw CacheIOError("cannot create cache directory " + dir.string());
  journal_ = dir / journal_name;
  load();
}

void JsonlCache::load() {
  std::ifstream in(journal_);
  if (!in) return;  // fresh cache
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::size_t> bad_line;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (bad_line) {
      throw CacheIOError(journal_.string() + ": corrupt entry at line " +
                         std::to_string(*bad_line));
    }
    try {
      auto entry = json::parse(line);
      if (!entry.is_object() || !entry.contains("key")) {
        bad_line = line_no;
        continue;
      }
      entries_.emplace(entry["key"].dump(), std::move(entry));
    } catch (const json::exception&) {
      bad_line = line_no;  // tolerated only as the final (torn) write
    }
  }
  if (bad_line) {
    spdlog::warn("{}: ignoring torn final entry at line {}", journal_.string(),
                 *bad_line);
  }
}

std::optional<json> JsonlCache::get(const json& key) const {
  std::shared_lock lock(mutex_);
  auto it = entries_.find(key.dump());
  if (it == entries_.end()) return std::nullopt;
  return std::optional<json>(std::in_place, it->second);
}

bool JsonlCache::put(const json& entry) {
  if (!entry.contains("key")) throw CacheIOError("cache entry without key");
  std::unique_lock lock(mutex_);
  const auto k = entry["key"].dump();
  if (entries_.contains(k)) return false;
  std::ofstream out(journal_, std::ios::app);
  out << entry.dump() << '\n';
  out.flush();
  if (!out) throw CacheIOError("cannot append to " + journal_.string());
  entries_.emplace(k, entry);
  return true;
}

std::size_t JsonlCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

std::vector<json> JsonlCache::entries() const {
  std::shared_lock lock(mutex_);
  std::vector<json> out;
  out.reserve(entries_.size());
  for (const auto& [k, v] : entries_) out.push_back(v);
  return out;
}

void JsonlCache::compact() {
  std::unique_lock lock(mutex_);
  auto tmp = journal_;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    for (const auto& [k, v] : entries_) out << v.dump() << '\n';
    if (!out) throw CacheIOError("cannot write " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, journal_, ec);
  if (ec) throw CacheIOError("cannot replace " + journal_.string());
}

}  // namespace care
