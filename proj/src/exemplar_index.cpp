#include "care/exemplar_index.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <future>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "care/context.hpp"
#include "care/errors.hpp"
#include "care/kernels.hpp"

namespace care {

std::string_view to_key(Polarity p) noexcept {
  return p == Polarity::Positive ? "positive" : "negative";
}

int polarity_label(Polarity p) noexcept {
  return p == Polarity::Positive ? kMaxLabel : kMinLabel;
}

std::size_t ExemplarPools::total_size() const noexcept {
  std::size_t n = 0;
  for (const auto& p : pools_) n += p.size();
  return n;
}

std::vector<std::string> ExemplarPools::source_ids() const {
  std::vector<std::string> ids;
  for (const auto& p : pools_) {
    for (const auto& e : p) ids.push_back(e.source_utterance_id);
  }
  return ids;
}

std::string serialize_pair(const QueryPair& pair) {
  std::string out = "Patient:";
  if (!pair.patient_text.empty()) out += ' ' + pair.patient_text;
  out += "\nTherapist: ";
  out += pair.therapist_text;
  return out;
}

QueryPair query_pair_at(const Session& session, std::size_t position) {
  QueryPair q;
  q.therapist_text = session.turns.at(position).text;
  if (auto p = preceding_patient(session, position)) {
    q.patient_text = session.turns[*p].text;
  }
  return q;
}

PoolBuildResult build_pools(const Corpus& train, EmbeddingProvider& provider,
                            const PoolBuildOptions& options) {
  PoolBuildResult result{ExemplarPools(provider.id(), provider.dimension()), {}};

  // Collect members first so embedding order is fixed regardless of how
  // provider batches complete.
  std::vector<ExemplarPair> members;
  for (const auto& session : train.sessions()) {
    for (std::size_t pos = 0; pos < session.turns.size(); ++pos) {
      const auto& u = session.turns[pos];
      const Labels* labels = train.labels(u.utterance_id);
      if (labels == nullptr) continue;
      const auto patient = preceding_patient(session, pos);
      if (!patient) continue;
      for (Dimension d : kAllDimensions) {
        for (Polarity p : kAllPolarities) {
          if ((*labels)[dimension_index(d)] != polarity_label(p)) continue;
          members.push_back(ExemplarPair{d, p, session.turns[*patient].text,
                                         u.text, u.utterance_id, {}});
        }
      }
    }
  }

  const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
  const std::size_t num_batches = (members.size() + batch - 1) / batch;
  auto embed_batch = [&](std::size_t b) {
    const std::size_t lo = b * batch;
    const std::size_t hi = std::min(members.size(), lo + batch);
    std::vector<std::string> texts;
    for (std::size_t i = lo; i < hi; ++i) {
      texts.push_back(serialize_pair({members[i].patient_text,
                                      members[i].therapist_text}));
    }
    std::vector<std::vector<float>> vecs;
    try {
      vecs = provider.embed(texts);
    } catch (const std::exception& e) {
      throw ProviderError(fmt::format("embedding exemplar '{}' failed: {}",
                                      members[lo].source_utterance_id, e.what()));
    }
    if (vecs.size() != hi - lo) {
      throw ProviderError("provider returned the wrong number of embeddings");
    }
    for (std::size_t i = lo; i < hi; ++i) {
      auto& v = vecs[i - lo];
      if (v.size() != provider.dimension()) {
        throw ProviderError(fmt::format("embedding for '{}' has width {}",
                                        members[i].source_utterance_id, v.size()));
      }
      normalize(v);
      members[i].embedding = std::move(v);
    }
  };

  const std::size_t width = std::max<std::size_t>(1, options.parallelism);
  for (std::size_t start = 0; start < num_batches; start += width) {
    std::vector<std::future<void>> inflight;
    for (std::size_t b = start; b < std::min(num_batches, start + width); ++b) {
      inflight.push_back(std::async(std::launch::async, embed_batch, b));
    }
    for (auto& f : inflight) f.get();
  }

  for (auto& m : members) {
    result.pools.pool(m.dimension, m.polarity).push_back(std::move(m));
  }
  for (Dimension d : kAllDimensions) {
    for (Polarity p : kAllPolarities) {
      if (result.pools.pool(d, p).empty()) {
        auto msg = fmt::format("EmptyPoolWarning: no exemplars for ({}, {})",
                               to_key(d), to_key(p));
        spdlog::warn(msg);
        result.warnings.push_back(std::move(msg));
      }
    }
  }
  return result;
}

std::vector<ScoredExemplar> retrieve(std::span<const float> query_embedding,
                                     const ExemplarPool& pool, std::size_t top_n) {
  if (top_n == 0) throw ConfigError("top_n must be at least 1");
  if (pool.empty()) return {};
  const std::size_t dim = query_embedding.size();

  // Packed copy for the scan kernel.
  std::vector<float> rows;
  rows.reserve(pool.size() * dim);
  for (const auto& e : pool) {
    if (e.embedding.size() != dim) {
      throw ShapeMismatchError("query and exemplar embedding widths differ");
    }
    rows.insert(rows.end(), e.embedding.begin(), e.embedding.end());
  }
  double qnorm = 0.0;
  for (float x : query_embedding) qnorm += static_cast<double>(x) * x;
  qnorm = std::sqrt(qnorm);

  std::vector<double> dots(pool.size());
  kernels::dot_scan(query_embedding, rows, dim, dots);

  std::vector<ScoredExemplar> scored(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    double enorm = 0.0;
    for (float x : pool[i].embedding) enorm += static_cast<double>(x) * x;
    enorm = std::sqrt(enorm);
    const double denom = qnorm * enorm;
    scored[i] = {&pool[i], denom > 0.0 ? dots[i] / denom : 0.0};
  }
  const std::size_t n = std::min(top_n, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n),
                    scored.end(), [](const ScoredExemplar& a, const ScoredExemplar& b) {
                      if (a.similarity != b.similarity) return a.similarity > b.similarity;
                      return a.exemplar->source_utterance_id <
                             b.exemplar->source_utterance_id;
                    });
  scored.resize(n);
  return scored;
}

std::vector<float> embed_query(const QueryPair& query, EmbeddingProvider& provider) {
  auto vecs = provider.embed({serialize_pair(query)});
  if (vecs.size() != 1 || vecs[0].size() != provider.dimension()) {
    throw ProviderError("provider returned a malformed query embedding");
  }
  normalize(vecs[0]);
  return std::move(vecs[0]);
}

std::vector<ScoredExemplar> retrieve(const QueryPair& query,
                                     const ExemplarPools& pools, Dimension d,
                                     Polarity p, std::size_t top_n,
                                     EmbeddingProvider& provider) {
  if (provider.id() != pools.provider_id()) {
    throw ProviderError("index was built with provider '" + pools.provider_id() +
                        "' but queried with '" + provider.id() + "'");
  }
  const auto q = embed_query(query, provider);
  return retrieve(q, pools.pool(d, p), top_n);
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr char kMagic[8] = {'C', 'A', 'R', 'E', 'I', 'D', 'X', '\0'};
constexpr std::uint32_t kByteOrderMark = 0x01020304;

class Writer {
 public:
  explicit Writer(std::ofstream& out) : out_(out) {}
  template <typename T>
  void pod(const T& v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void floats(const std::vector<float>& v) {
    out_.write(reinterpret_cast<const char*>(v.data()),
               static_cast<std::streamsize>(v.size() * sizeof(float)));
  }

 private:
  std::ofstream& out_;
};

class Reader {
 public:
  Reader(std::ifstream& in, std::string source) : in_(in), source_(std::move(source)) {}
  template <typename T>
  T pod() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    check();
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    if (n > (1ULL << 32)) throw IOError(source_ + ": corrupt string length");
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    check();
    return s;
  }
  std::vector<float> floats(std::size_t n) {
    std::vector<float> v(n);
    in_.read(reinterpret_cast<char*>(v.data()),
             static_cast<std::streamsize>(n * sizeof(float)));
    check();
    return v;
  }

 private:
  void check() {
    if (!in_) throw IOError(source_ + ": truncated index file");
  }
  std::ifstream& in_;
  std::string source_;
};

}  // namespace

void persist_index(const ExemplarPools& pools, const std::filesystem::path& path,
                   const std::string& metadata) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IOError("cannot write index file " + path.string());
  Writer w(out);
  out.write(kMagic, sizeof(kMagic));
  w.pod(kIndexFormatVersion);
  w.pod(kByteOrderMark);
  w.str(pools.provider_id());
  w.pod<std::uint64_t>(pools.embedding_dim());
  w.str(metadata);
  for (Dimension d : kAllDimensions) {
    for (Polarity p : kAllPolarities) {
      const auto& pool = pools.pool(d, p);
      w.pod<std::uint64_t>(pool.size());
      for (const auto& e : pool) {
        w.str(e.patient_text);
        w.str(e.therapist_text);
        w.str(e.source_utterance_id);
        w.floats(e.embedding);
      }
    }
  }
  if (!out) throw IOError("failed writing index file " + path.string());
}

ExemplarPools load_index(const std::filesystem::path& path, std::string* metadata) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IOError("cannot open index file " + path.string());
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IOError(path.string() + " is not an exemplar index");
  }
  Reader r(in, path.string());
  const auto version = r.pod<std::uint32_t>();
  if (version != kIndexFormatVersion) {
    throw VersionMismatchError(fmt::format("{}: index format version {}, expected {}",
                                           path.string(), version,
                                           kIndexFormatVersion));
  }
  if (r.pod<std::uint32_t>() != kByteOrderMark) {
    throw IOError(path.string() + ": written on a host with different byte order");
  }
  auto provider = r.str();
  const auto dim = r.pod<std::uint64_t>();
  auto meta = r.str();
  if (metadata != nullptr) *metadata = std::move(meta);
  ExemplarPools pools(std::move(provider), dim);
  for (Dimension d : kAllDimensions) {
    for (Polarity p : kAllPolarities) {
      const auto n = r.pod<std::uint64_t>();
      auto& pool = pools.pool(d, p);
      pool.reserve(n);
      for (std::uint64_t i = 0; i < n; ++i) {
        ExemplarPair e;
        e.dimension = d;
        e.polarity = p;
        e.patient_text = r.str();
        e.therapist_text = r.str();
        e.source_utterance_id = r.str();
        e.embedding = r.floats(dim);
        pool.push_back(std::move(e));
      }
    }
  }
  return pools;
}

std::vector<std::string> audit_pools(const ExemplarPools& pools,
                                     const Corpus& corpus,
                                     const SplitAssignment& split) {
  std::vector<std::string> issues;
  for (Dimension d : kAllDimensions) {
    for (Polarity p : kAllPolarities) {
      for (const auto& e : pools.pool(d, p)) {
        const auto* u = corpus.find_utterance(e.source_utterance_id);
        const Labels* labels = corpus.labels(e.source_utterance_id);
        if (u == nullptr || labels == nullptr) {
          issues.push_back("exemplar '" + e.source_utterance_id +
                           "' is not an annotated corpus utterance");
          continue;
        }
        const int label = (*labels)[dimension_index(d)];
        if (label != polarity_label(p)) {
          issues.push_back(fmt::format("exemplar '{}' in ({}, {}) has label {}",
                                       e.source_utterance_id, to_key(d),
                                       to_key(p), label));
        }
        if (split.split_of(u->session_id) != Split::Train) {
          issues.push_back("exemplar '" + e.source_utterance_id +
                           "' does not come from the train split");
        }
      }
    }
  }
  return issues;
}

}  // namespace care
