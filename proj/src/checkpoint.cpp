#include "care/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "care/errors.hpp"
#include "care/hashing.hpp"

namespace care {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[8] = {'C', 'A', 'R', 'E', 'P', 'R', 'M', '\0'};
constexpr std::uint32_t kParamFormatVersion = 1;

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(std::string_view& in, const std::string& what) {
  if (in.size() < sizeof(T)) throw IOError("truncated parameter file " + what);
  T v;
  std::memcpy(&v, in.data(), sizeof(T));
  in.remove_prefix(sizeof(T));
  return v;
}

bool is_adapter(const std::string& name) { return name.starts_with("adapter."); }

std::string encode_params(const TrainableParams& p, bool adapters) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kParamFormatVersion);
  std::size_t count = 0;
  p.visit([&](const std::string& name, const Matrix&) {
    if (is_adapter(name) == adapters) ++count;
  });
  put<std::uint64_t>(out, count);
  p.visit([&](const std::string& name, const Matrix& m) {
    if (is_adapter(name) != adapters) return;
    put<std::uint64_t>(out, name.size());
    out += name;
    put<std::uint64_t>(out, m.rows);
    put<std::uint64_t>(out, m.cols);
    for (double v : m.data) put<double>(out, v);
  });
  return out;
}

std::map<std::string, Matrix> decode_params(const std::string& bytes, const std::string& what) {
  std::string_view in(bytes);
  if (in.size() < sizeof(kMagic) || std::memcmp(in.data(), kMagic, sizeof(kMagic)) != 0) {
    throw IOError(what + " is not a parameter file");
  }
  in.remove_prefix(sizeof(kMagic));
  const auto version = take<std::uint32_t>(in, what);
  if (version != kParamFormatVersion) {
    throw VersionMismatchError(fmt::format("{} has format version {}, expected {}", what,
                                           version, kParamFormatVersion));
  }
  const auto count = take<std::uint64_t>(in, what);
  std::map<std::string, Matrix> out;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = take<std::uint64_t>(in, what);
    if (in.size() < len) throw IOError("truncated parameter file " + what);
    std::string name(in.substr(0, len));
    in.remove_prefix(len);
    const auto rows = take<std::uint64_t>(in, what);
    const auto cols = take<std::uint64_t>(in, what);
    Matrix m(rows, cols);
    for (double& v : m.data) v = take<double>(in, what);
    out.emplace(std::move(name), std::move(m));
  }
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("checkpoint file " + path.string() + " is missing");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IOError("cannot write " + path.string());
}

std::vector<EpochMetrics> parse_history(const std::string& csv) {
  std::vector<EpochMetrics> out;
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#' || line.starts_with("epoch")) continue;
    EpochMetrics m;
    char comma;
    std::istringstream row(line);
    row >> m.epoch >> comma >> m.train_loss >> comma >> m.train_accuracy >> comma >>
        m.train_weighted_f1 >> comma >> m.val_accuracy >> comma >> m.val_weighted_f1;
    if (!row) throw ParseError("malformed metrics.csv row: " + line);
    out.push_back(m);
  }
  return out;
}

}  // namespace

std::string ModelCheckpoint::fingerprint() const {
  std::string bytes = config_fingerprint(config);
  bytes += encode_params(params, true);
  bytes += encode_params(params, false);
  return care::fingerprint(bytes);
}

std::string history_csv(const std::vector<EpochMetrics>& history,
                        const std::string& config_fingerprint) {
  // Full precision so a reload reproduces the history exactly.
  std::string out = "# config_fingerprint=" + config_fingerprint + "\n";
  out += "epoch,train_loss,train_accuracy,train_weighted_f1,val_accuracy,val_weighted_f1\n";
  for (const auto& m : history) {
    out += fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", m.epoch, m.train_loss,
                       m.train_accuracy, m.train_weighted_f1, m.val_accuracy,
                       m.val_weighted_f1);
  }
  return out;
}

void save_checkpoint(const ModelCheckpoint& ckpt, const fs::path& dir) {
  fs::create_directories(dir);
  nlohmann::json cfg = to_json(ckpt.config);
  nlohmann::json meta = {{"config", cfg},
                         {"config_fingerprint", config_fingerprint(ckpt.config)},
                         {"best_epoch", ckpt.best_epoch},
                         {"corpus_fingerprint", ckpt.corpus_fingerprint}};
  write_file(dir / "config.json", meta.dump(2) + "\n");
  write_file(dir / "adapter.bin", encode_params(ckpt.params, true));
  write_file(dir / "head.bin", encode_params(ckpt.params, false));
  write_file(dir / "metrics.csv", history_csv(ckpt.history, config_fingerprint(ckpt.config)));
  write_file(dir / "fingerprint", ckpt.fingerprint() + "\n");
}

ModelCheckpoint load_checkpoint(const fs::path& dir) {
  ModelCheckpoint ckpt;
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_file(dir / "config.json"));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("checkpoint config.json: " + std::string(e.what()));
  }
  ckpt.config = train_config_from_json(meta.at("config"));
  ckpt.best_epoch = meta.value("best_epoch", std::size_t{0});
  ckpt.corpus_fingerprint = meta.value("corpus_fingerprint", std::string{});

  auto stored = decode_params(read_file(dir / "adapter.bin"), "adapter.bin");
  stored.merge(decode_params(read_file(dir / "head.bin"), "head.bin"));
  // Shapes come from a freshly configured model; values from disk.
  ckpt.params = CareModel(ckpt.config).params();
  ckpt.params.visit([&](const std::string& name, Matrix& m) {
    const auto it = stored.find(name);
    if (it == stored.end()) throw MissingArtifactError("checkpoint lacks parameter " + name);
    if (it->second.rows != m.rows || it->second.cols != m.cols) {
      throw ShapeMismatchError("checkpoint parameter " + name + " has the wrong shape");
    }
    m = std::move(it->second);
  });
  ckpt.history = parse_history(read_file(dir / "metrics.csv"));

  std::string fp = read_file(dir / "fingerprint");
  while (!fp.empty() && (fp.back() == '\n' || fp.back() == '\r')) fp.pop_back();
  if (fp != ckpt.fingerprint()) {
    throw FingerprintMismatchError("checkpoint contents do not match its fingerprint file");
  }
  return ckpt;
}

}  // namespace care
