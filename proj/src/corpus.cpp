#include "care/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "care/errors.hpp"
#include "care/hashing.hpp"
#include "care/random.hpp"

namespace care {

using nlohmann::json;

std::string_view to_key(Speaker s) noexcept {
  return s == Speaker::Patient ? "patient" : "therapist";
}

std::string_view to_key(Split s) noexcept {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "unknown";
}

std::optional<std::size_t> Session::position_of(int turn_index) const {
  auto it = std::lower_bound(
      turns.begin(), turns.end(), turn_index,
      [](const Utterance& u, int t) { return u.turn_index < t; });
  if (it == turns.end() || it->turn_index != turn_index) return std::nullopt;
  return static_cast<std::size_t>(it - turns.begin());
}

Corpus Corpus::build(std::vector<Utterance> utterances,
                     std::vector<AnnotationRecord> annotations) {
  Corpus c;
  std::map<std::string, std::vector<Utterance>> by_session;
  std::set<std::string> seen_ids;
  for (auto& u : utterances) {
    if (!seen_ids.insert(u.utterance_id).second) {
      throw DuplicateIdError("duplicate utterance_id '" + u.utterance_id + "'");
    }
    by_session[u.session_id].push_back(std::move(u));
  }
  for (auto& [sid, turns] : by_session) {
    std::sort(turns.begin(), turns.end(),
              [](const Utterance& a, const Utterance& b) {
                return a.turn_index < b.turn_index;
              });
    for (std::size_t i = 1; i < turns.size(); ++i) {
      if (turns[i].turn_index == turns[i - 1].turn_index) {
        throw DuplicateIdError(fmt::format(
            "duplicate turn_index {} in session '{}'", turns[i].turn_index, sid));
      }
    }
    c.sessions_.push_back(Session{sid, std::move(turns)});
  }
  for (std::size_t s = 0; s < c.sessions_.size(); ++s) {
    const auto& turns = c.sessions_[s].turns;
    for (std::size_t p = 0; p < turns.size(); ++p) {
      c.index_.emplace(turns[p].utterance_id, Location{s, p});
    }
  }
  for (auto& a : annotations) {
    const Utterance* u = c.find_utterance(a.utterance_id);
    if (u == nullptr) {
      throw AnnotationTargetError("annotation references missing utterance '" +
                                  a.utterance_id + "'");
    }
    if (u->speaker != Speaker::Therapist) {
      throw AnnotationTargetError("annotation references patient utterance '" +
                                  a.utterance_id + "'");
    }
    for (int label : a.labels) {
      if (!is_valid_label(label)) {
        throw ParseError(fmt::format("annotation '{}' has label {} outside [-2, +2]",
                                     a.utterance_id, label));
      }
    }
    if (!c.annotations_.emplace(a.utterance_id, a.labels).second) {
      throw DuplicateIdError("duplicate annotation for '" + a.utterance_id + "'");
    }
  }
  return c;
}

const Session* Corpus::find_session(const std::string& id) const {
  auto it = std::lower_bound(
      sessions_.begin(), sessions_.end(), id,
      [](const Session& s, const std::string& key) { return s.id < key; });
  if (it == sessions_.end() || it->id != id) return nullptr;
  return &*it;
}

std::optional<Corpus::Location> Corpus::locate(
    const std::string& utterance_id) const {
  auto it = index_.find(utterance_id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const Utterance* Corpus::find_utterance(const std::string& utterance_id) const {
  auto loc = locate(utterance_id);
  if (!loc) return nullptr;
  return &sessions_[loc->session].turns[loc->position];
}

const Labels* Corpus::labels(const std::string& utterance_id) const {
  auto it = annotations_.find(utterance_id);
  return it == annotations_.end() ? nullptr : &it->second;
}

std::size_t Corpus::num_utterances() const noexcept {
  std::size_t n = 0;
  for (const auto& s : sessions_) n += s.turns.size();
  return n;
}

std::size_t Corpus::num_therapist_utterances() const noexcept {
  std::size_t n = 0;
  for (const auto& s : sessions_) {
    for (const auto& u : s.turns) n += u.speaker == Speaker::Therapist;
  }
  return n;
}

std::vector<std::string> Corpus::session_ids() const {
  std::vector<std::string> ids;
  ids.reserve(sessions_.size());
  for (const auto& s : sessions_) ids.push_back(s.id);
  return ids;
}

Corpus Corpus::subset(const std::set<std::string>& session_ids) const {
  std::vector<Utterance> utts;
  std::vector<AnnotationRecord> anns;
  for (const auto& s : sessions_) {
    if (!session_ids.contains(s.id)) continue;
    for (const auto& u : s.turns) {
      utts.push_back(u);
      if (const Labels* l = labels(u.utterance_id)) {
        anns.push_back({u.utterance_id, *l});
      }
    }
  }
  return build(std::move(utts), std::move(anns));
}

std::string Corpus::fingerprint() const {
  std::ostringstream u, a;
  write_corpus(*this, u, a);
  return care::fingerprint(u.str() + "\x1e" + a.str());
}

// ---------------------------------------------------------------------------
// JSON

json to_json(const Utterance& u) {
  return json{{"session_id", u.session_id},
              {"turn_index", u.turn_index},
              {"speaker", to_key(u.speaker)},
              {"text", u.text},
              {"utterance_id", u.utterance_id}};
}

json labels_to_json(const Labels& labels) {
  json j = json::object();
  for (Dimension d : kAllDimensions) {
    j[std::string(to_key(d))] = labels[dimension_index(d)];
  }
  return j;
}

json to_json(const AnnotationRecord& a) {
  return json{{"utterance_id", a.utterance_id},
              {"labels", labels_to_json(a.labels)}};
}

Labels labels_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("labels must be an object");
  if (j.size() != kNumDimensions) {
    throw ParseError(fmt::format("labels must have exactly {} entries, got {}",
                                 kNumDimensions, j.size()));
  }
  Labels out{};
  std::array<bool, kNumDimensions> seen{};
  for (const auto& [key, value] : j.items()) {
    auto dim = dimension_from_key(key);
    if (!dim) throw ParseError("unknown dimension '" + key + "'");
    if (!value.is_number_integer()) {
      throw ParseError("label for '" + key + "' must be an integer");
    }
    const int v = value.get<int>();
    if (!is_valid_label(v)) {
      throw ParseError(fmt::format("label {} for '{}' outside [-2, +2]", v, key));
    }
    out[dimension_index(*dim)] = v;
    seen[dimension_index(*dim)] = true;
  }
  if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) {
    throw ParseError("labels missing a dimension");
  }
  return out;
}

namespace {

bool is_blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return std::isspace(c); });
}

template <typename T>
T required(const json& j, const char* key) {
  if (!j.contains(key)) throw ParseError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError(std::string("field '") + key + "' has the wrong type");
  }
}

Utterance parse_utterance(const json& j) {
  if (!j.is_object()) throw ParseError("expected a JSON object");
  Utterance u;
  u.session_id = required<std::string>(j, "session_id");
  if (!j.contains("turn_index") || !j["turn_index"].is_number_integer()) {
    throw ParseError("field 'turn_index' must be an integer");
  }
  const auto turn = j["turn_index"].get<long long>();
  if (turn < 0) throw ParseError("turn_index must be non-negative");
  u.turn_index = static_cast<int>(turn);
  const auto speaker = required<std::string>(j, "speaker");
  if (speaker == "patient") {
    u.speaker = Speaker::Patient;
  } else if (speaker == "therapist") {
    u.speaker = Speaker::Therapist;
  } else {
    throw ParseError("speaker must be \"patient\" or \"therapist\", got \"" +
                     speaker + "\"");
  }
  u.text = required<std::string>(j, "text");
  if (u.text.empty()) throw ParseError("text must be non-empty");
  u.utterance_id = required<std::string>(j, "utterance_id");
  if (u.utterance_id.empty()) throw ParseError("utterance_id must be non-empty");
  return u;
}

AnnotationRecord parse_annotation(const json& j) {
  if (!j.is_object()) throw ParseError("expected a JSON object");
  AnnotationRecord a;
  a.utterance_id = required<std::string>(j, "utterance_id");
  if (!j.contains("labels")) throw ParseError("missing field 'labels'");
  a.labels = labels_from_json(j["labels"]);
  return a;
}

// Parses each non-blank line; errors carry source name and line number.
template <typename T, typename F>
std::vector<T> parse_lines(std::istream& in, std::string_view source, F parse) {
  std::vector<T> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    try {
      out.push_back(parse(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw ParseError(fmt::format("{}:{}: invalid JSON: {}", source, line_no,
                                   e.what()));
    } catch (const ParseError& e) {
      throw ParseError(fmt::format("{}:{}: {}", source, line_no, e.what()));
    }
  }
  return out;
}

}  // namespace

Corpus read_corpus(std::istream& utterances, std::istream* annotations) {
  auto utts = parse_lines<Utterance>(utterances, "utterances", parse_utterance);
  std::vector<AnnotationRecord> anns;
  if (annotations != nullptr) {
    anns = parse_lines<AnnotationRecord>(*annotations, "annotations",
                                         parse_annotation);
  }
  return Corpus::build(std::move(utts), std::move(anns));
}

Corpus ingest_corpus(const std::filesystem::path& utterances,
                     const std::optional<std::filesystem::path>& annotations) {
  std::ifstream uin(utterances);
  if (!uin) throw IOError("cannot open utterance file " + utterances.string());
  if (!annotations) return read_corpus(uin, nullptr);
  std::ifstream ain(*annotations);
  if (!ain) throw IOError("cannot open annotation file " + annotations->string());
  return read_corpus(uin, &ain);
}

void write_corpus(const Corpus& corpus, std::ostream& utterances,
                  std::ostream& annotations) {
  for (const auto& s : corpus.sessions()) {
    for (const auto& u : s.turns) utterances << to_json(u).dump() << '\n';
  }
  for (const auto& [id, labels] : corpus.annotations()) {
    annotations << to_json(AnnotationRecord{id, labels}).dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// Splits

std::optional<Split> SplitAssignment::split_of(const std::string& sid) const {
  if (train.contains(sid)) return Split::Train;
  if (validation.contains(sid)) return Split::Validation;
  if (test.contains(sid)) return Split::Test;
  return std::nullopt;
}

std::set<std::string>& SplitAssignment::sessions(Split s) {
  switch (s) {
    case Split::Train: return train;
    case Split::Validation: return validation;
    case Split::Test: return test;
  }
  return train;
}

const std::set<std::string>& SplitAssignment::sessions(Split s) const {
  return const_cast<SplitAssignment*>(this)->sessions(s);
}

SplitAssignment split_sessions(const Corpus& corpus, SplitRatios ratios,
                               std::uint64_t seed) {
  const std::size_t n = corpus.sessions().size();
  if (n < 3) {
    throw TooFewSessionsError(
        fmt::format("need at least 3 sessions to split, got {}", n));
  }
  if (ratios.train <= 0 || ratios.validation <= 0 || ratios.test <= 0 ||
      std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-6) {
    throw ConfigError("split ratios must be positive and sum to 1");
  }
  std::vector<std::string> ids = corpus.session_ids();  // already sorted
  Rng rng(seed);
  rng.shuffle(ids.begin(), ids.end());

  // The epsilon absorbs representation error such as (0.7 + 0.1) * 10
  // evaluating to 7.999...
  constexpr double kEps = 1e-9;
  const double s = static_cast<double>(n);
  const auto cut1 = static_cast<std::size_t>(std::floor(ratios.train * s + kEps));
  const auto cut2 = static_cast<std::size_t>(
      std::floor((ratios.train + ratios.validation) * s + kEps));

  SplitAssignment out;
  out.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    auto& bucket = i < cut1 ? out.train : i < cut2 ? out.validation : out.test;
    bucket.insert(ids[i]);
  }
  return out;
}

json to_json(const SplitAssignment& split) {
  return json{{"train", split.train},
              {"validation", split.validation},
              {"test", split.test},
              {"seed", split.seed}};
}

SplitAssignment split_from_json(const json& j, const Corpus& corpus) {
  SplitAssignment out;
  std::set<std::string> seen;
  for (Split s : {Split::Train, Split::Validation, Split::Test}) {
    const std::string key(to_key(s));
    if (!j.contains(key) || !j[key].is_array()) {
      throw ParseError("split file missing array '" + key + "'");
    }
    auto& bucket = out.sessions(s);
    for (const auto& v : j[key]) {
      const auto sid = v.get<std::string>();
      if (!seen.insert(sid).second) {
        throw ParseError("session '" + sid + "' assigned to more than one split");
      }
      if (corpus.find_session(sid) == nullptr) {
        throw ParseError("split file names unknown session '" + sid + "'");
      }
      bucket.insert(sid);
    }
  }
  if (seen.size() != corpus.sessions().size()) {
    throw ParseError(fmt::format("split file covers {} of {} sessions",
                                 seen.size(), corpus.sessions().size()));
  }
  if (j.contains("seed")) out.seed = j["seed"].get<std::uint64_t>();
  return out;
}

SplitAssignment read_split_file(const std::filesystem::path& path,
                                const Corpus& corpus) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot open split file " + path.string());
  try {
    return split_from_json(json::parse(in), corpus);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::vector<std::string> annotated_ids(const Corpus& corpus,
                                       const std::set<std::string>& sessions) {
  std::vector<std::string> out;
  for (const auto& s : corpus.sessions()) {
    if (!sessions.contains(s.id)) continue;
    for (const auto& u : s.turns) {
      if (corpus.labels(u.utterance_id) != nullptr) out.push_back(u.utterance_id);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Validation

ValidationReport validate_corpus(const Corpus& corpus) {
  ValidationReport r;
  r.sessions = corpus.sessions().size();
  for (const auto& s : corpus.sessions()) {
    SessionStats st{s.id, s.turns.size(), 0, 0, 0};
    for (std::size_t i = 0; i < s.turns.size(); ++i) {
      const auto& u = s.turns[i];
      if (u.speaker == Speaker::Patient) {
        ++st.patient_turns;
      } else {
        ++st.therapist_turns;
        if (const Labels* l = corpus.labels(u.utterance_id)) {
          ++st.annotated;
          for (Dimension d : kAllDimensions) {
            const auto di = dimension_index(d);
            ++r.counts[di][label_to_class((*l)[di])];
          }
        }
      }
      if (i > 0 && s.turns[i - 1].speaker == u.speaker) {
        r.warnings.push_back(fmt::format(
            "session '{}': consecutive {} turns at turn_index {} and {}", s.id,
            to_key(u.speaker), s.turns[i - 1].turn_index, u.turn_index));
      }
    }
    if (!s.turns.empty() && s.turns.front().speaker == Speaker::Therapist) {
      r.warnings.push_back("session '" + s.id + "': starts with a therapist turn");
    }
    r.utterances += st.turns;
    r.therapist_utterances += st.therapist_turns;
    r.annotated += st.annotated;
    r.session_stats.push_back(std::move(st));
  }
  return r;
}

namespace {
constexpr std::array<std::string_view, kNumClasses> kClassAbbrev = {
    "SN", "MN", "Neu", "MP", "SP"};
}

json to_json(const ValidationReport& r) {
  json dims = json::object();
  for (Dimension d : kAllDimensions) {
    json row = json::object();
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      row[std::string(kClassAbbrev[c])] = r.counts[dimension_index(d)][c];
    }
    dims[std::string(to_key(d))] = row;
  }
  json sessions = json::array();
  for (const auto& s : r.session_stats) {
    sessions.push_back({{"session_id", s.session_id},
                        {"turns", s.turns},
                        {"patient_turns", s.patient_turns},
                        {"therapist_turns", s.therapist_turns},
                        {"annotated", s.annotated}});
  }
  return json{{"sessions", r.sessions},
              {"utterances", r.utterances},
              {"therapist_utterances", r.therapist_utterances},
              {"annotated", r.annotated},
              {"label_distribution", dims},
              {"session_stats", sessions},
              {"warnings", r.warnings}};
}

std::string to_csv(const ValidationReport& r) {
  std::string out = "dimension,SN,MN,Neu,MP,SP,total\n";
  for (Dimension d : kAllDimensions) {
    const auto& row = r.counts[dimension_index(d)];
    std::size_t total = 0;
    out += to_key(d);
    for (auto c : row) {
      out += fmt::format(",{}", c);
      total += c;
    }
    out += fmt::format(",{}\n", total);
  }
  return out;
}

}  // namespace care
