#include "care/pipeline/artifacts.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "care/errors.hpp"
#include "care/hashing.hpp"

namespace care::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

Workspace::Workspace(const PipelineConfig& config)
    : root_(config.output_dir), fingerprint_(config.fingerprint()) {}

fs::path Workspace::predictions(std::string_view split) const {
  return root_ / "predictions" / ("care_" + std::string(split) + ".jsonl");
}

fs::path Workspace::baseline_predictions(std::string_view mode, std::string_view split) const {
  return root_ / "baseline" / (std::string(mode) + "_" + std::string(split) + ".jsonl");
}

void Workspace::require(const fs::path& path, std::string_view producer) const {
  if (!fs::exists(path)) {
    throw MissingArtifactError(path.string() + " is missing; run `care " +
                               std::string(producer) + "` first");
  }
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IOError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

void write_atomic(const fs::path& path, const std::string& contents) {
  fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IOError("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace

void Workspace::write(const fs::path& path, const std::string& contents,
                      std::string_view command) const {
  write_atomic(path, contents);
  record(path, command);
}

void Workspace::record(const fs::path& path, std::string_view command) const {
  json doc = {{"artifacts", json::object()}};
  if (fs::exists(manifest())) {
    doc = json::parse(read_text(manifest()), nullptr, false);
    if (doc.is_discarded() || !doc.contains("artifacts")) {
      throw ParseError(manifest().string() + " is not a valid manifest");
    }
  }
  const auto rel = fs::relative(path, root_).generic_string();
  doc["artifacts"][rel] = {{"command", command},
                                {"sha256", sha256_hex(read_text(path))},
                                {"config_fingerprint", fingerprint_}};
  doc["config_fingerprint"] = fingerprint_;
  write_atomic(manifest(), doc.dump(2) + "\n");
}

}  // namespace care::pipeline
