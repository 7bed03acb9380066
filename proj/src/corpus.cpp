#include "cpfd/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace cpfd {

bool is_wellformed_label(const std::string& label) {
  if (label == "O") return true;
  if (label.size() < 3) return false;
  if (label[0] != 'B' && label[0] != 'I') return false;
  return label[1] == '-';
}

std::string label_type(const std::string& label) {
  if (label == "O") return "";
  return label.substr(2);
}

namespace {

// Continuation check for repair: I-X is legal after B-X or I-X only.
bool continues_span(const std::string& prev, const std::string& type) {
  if (prev == "O" || prev.empty()) return false;
  return label_type(prev) == type;
}

void finish_sentence(std::vector<Sentence>& out, Sentence& current, bool repair_bio,
                     const std::string& path, int first_line) {
  if (current.tokens.empty()) return;
  for (std::size_t i = 0; i < current.labels.size(); ++i) {
    std::string& label = current.labels[i];
    if (label[0] == 'I') {
      const std::string type = label_type(label);
      const std::string prev = i == 0 ? std::string() : current.labels[i - 1];
      if (!continues_span(prev, type)) {
        if (repair_bio) {
          label = "B-" + type;
        } else {
          throw std::runtime_error(path + ": sentence starting near line " +
                                   std::to_string(first_line) + ": dangling " + label);
        }
      }
    }
  }
  out.push_back(std::move(current));
  current = Sentence{};
}

}  // namespace

std::vector<Sentence> read_conll(const std::string& path, bool repair_bio) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("read_conll: cannot open " + path);
  }
  std::vector<Sentence> out;
  Sentence current;
  std::string line;
  int line_no = 0;
  int sentence_first_line = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    // Blank line closes the sentence.
    if (line.find_first_not_of(" \t") == std::string::npos) {
      finish_sentence(out, current, repair_bio, path, sentence_first_line);
      sentence_first_line = line_no + 1;
      continue;
    }
    std::istringstream fields(line);
    std::vector<std::string> cols;
    std::string col;
    while (fields >> col) cols.push_back(col);
    if (cols[0] == "-DOCSTART-") {
      continue;
    }
    if (cols.size() < 2) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected 'token label', got '" + line + "'");
    }
    const std::string& token = cols.front();
    const std::string& label = cols.back();
    if (!is_wellformed_label(label)) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": malformed BIO label '" + label + "'");
    }
    if (current.tokens.empty()) sentence_first_line = line_no;
    current.tokens.push_back(token);
    current.labels.push_back(label);
  }
  finish_sentence(out, current, repair_bio, path, sentence_first_line);
  return out;
}

void write_conll(const std::string& path, const std::vector<Sentence>& sentences) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("write_conll: cannot open " + path);
  }
  for (const Sentence& s : sentences) {
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      out << s.tokens[i] << ' ' << s.labels[i] << '\n';
    }
    out << '\n';
  }
  if (!out) {
    throw std::runtime_error("write_conll: write failed for " + path);
  }
}

std::vector<std::string> collect_entity_types(const std::vector<Sentence>& sentences) {
  std::set<std::string> types;
  for (const Sentence& s : sentences) {
    for (const std::string& label : s.labels) {
      if (label != "O") types.insert(label_type(label));
    }
  }
  return {types.begin(), types.end()};
}

StepSchedule build_schedule(const std::vector<std::string>& types, int fg, int pg) {
  const int total = static_cast<int>(types.size());
  if (fg < 1 || pg < 1) {
    throw std::invalid_argument("build_schedule: FG and PG must be >= 1");
  }
  if (fg > total) {
    throw std::invalid_argument("build_schedule: FG " + std::to_string(fg) +
                                " exceeds type count " + std::to_string(total));
  }
  if ((total - fg) % pg != 0) {
    throw std::invalid_argument("build_schedule: (types - FG) = " +
                                std::to_string(total - fg) + " not divisible by PG = " +
                                std::to_string(pg));
  }
  StepSchedule schedule;
  schedule.fg = fg;
  schedule.pg = pg;
  schedule.steps.emplace_back(types.begin(), types.begin() + fg);
  for (int at = fg; at < total; at += pg) {
    schedule.steps.emplace_back(types.begin() + at, types.begin() + at + pg);
  }
  return schedule;
}

Sentence mask_sentence(const Sentence& s, const std::vector<std::string>& allowed) {
  Sentence out = s;
  for (std::string& label : out.labels) {
    if (label == "O") continue;
    const std::string type = label_type(label);
    if (std::find(allowed.begin(), allowed.end(), type) == allowed.end()) {
      label = "O";
    }
  }
  return out;
}

std::vector<Sentence> mask_to_types(const std::vector<Sentence>& sentences,
                                    const std::vector<std::string>& allowed) {
  std::vector<Sentence> out;
  out.reserve(sentences.size());
  for (const Sentence& s : sentences) {
    out.push_back(mask_sentence(s, allowed));
  }
  return out;
}

std::vector<StepDataset> slice_and_mask(const std::vector<Sentence>& train,
                                        const StepSchedule& schedule) {
  const int t_count = schedule.step_count();
  std::vector<StepDataset> out(t_count);
  for (int t = 0; t < t_count; ++t) out[t].step = t + 1;

  int round_robin = 0;
  for (const Sentence& s : train) {
    int target = -1;
    for (int t = 0; t < t_count && target < 0; ++t) {
      for (const std::string& label : s.labels) {
        if (label == "O") continue;
        const auto& types = schedule.steps[t];
        if (std::find(types.begin(), types.end(), label_type(label)) != types.end()) {
          target = t;
          break;
        }
      }
    }
    if (target < 0) {
      target = round_robin;
      round_robin = (round_robin + 1) % t_count;
    }
    out[target].sentences.push_back(mask_sentence(s, schedule.steps[target]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// synthetic corpus
// ---------------------------------------------------------------------------

namespace {

const char* kTypeNamePool[] = {
    "ANIMAL", "BEVERAGE", "CITY",   "DEVICE",   "EVENT",  "FABRIC", "GEM",
    "HERB",   "INSTRUMENT", "JOB",  "KINGDOM",  "LANGUAGE", "METAL", "NUMBER",
    "OCEAN",  "PLANET",   "QUANTITY", "RIVER",  "SPORT",  "TOOL"};
constexpr int kTypePoolSize = 20;
constexpr int kTriggersPerType = 6;

std::string lowercase(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Begin and inside positions draw from disjoint pools, so the token alone
// determines its BIO tag and a small model can reach the task ceiling.
std::string trigger_token(const std::string& type_name, int variant) {
  return lowercase(type_name) + std::to_string(variant);
}

std::string continuation_token(const std::string& type_name, int variant) {
  return lowercase(type_name) + "tail" + std::to_string(variant);
}

std::string filler_token(int index) {
  std::ostringstream os;
  os << "w";
  if (index < 100) os << (index < 10 ? "00" : "0");
  os << index;
  return os.str();
}

struct Mention {
  int type;
  int length;  // 1 or 2
};

void insert_mention(Sentence& s, const Mention& m, const std::string& type_name,
                    Rng& rng) {
  // Only insert at points that do not split an existing span.
  std::vector<int> points;
  for (int p = 0; p <= static_cast<int>(s.tokens.size()); ++p) {
    if (p == static_cast<int>(s.tokens.size()) || s.labels[p][0] != 'I') {
      points.push_back(p);
    }
  }
  const int pos = points[rng.uniform_int(static_cast<std::uint32_t>(points.size()))];
  std::vector<std::string> toks, labs;
  for (int i = 0; i < m.length; ++i) {
    const int variant = static_cast<int>(rng.uniform_int(kTriggersPerType));
    toks.push_back(i == 0 ? trigger_token(type_name, variant)
                          : continuation_token(type_name, variant));
    labs.push_back(i == 0 ? "B-" + type_name : "I-" + type_name);
  }
  s.tokens.insert(s.tokens.begin() + pos, toks.begin(), toks.end());
  s.labels.insert(s.labels.begin() + pos, labs.begin(), labs.end());
}

}  // namespace

std::vector<Sentence> generate_synthetic(const SyntheticConfig& cfg) {
  if (cfg.types < 1 || cfg.sentences_per_type < 1 || cfg.vocab_size < 1) {
    throw std::invalid_argument("generate_synthetic: sizes must be positive");
  }
  if (cfg.types > kTypePoolSize) {
    throw std::invalid_argument("generate_synthetic: at most " +
                                std::to_string(kTypePoolSize) + " types supported");
  }
  Rng rng(cfg.seed);
  std::vector<Sentence> out;
  out.reserve(static_cast<std::size_t>(cfg.types) * cfg.sentences_per_type);
  for (int type = 0; type < cfg.types; ++type) {
    for (int q = 0; q < cfg.sentences_per_type; ++q) {
      Sentence s;
      const int ctx = 4 + static_cast<int>(rng.uniform_int(5));
      for (int i = 0; i < ctx; ++i) {
        s.tokens.push_back(filler_token(static_cast<int>(rng.uniform_int(
            static_cast<std::uint32_t>(cfg.vocab_size)))));
        s.labels.push_back("O");
      }
      Mention primary{type, rng.uniform() < 0.35 ? 2 : 1};
      insert_mention(s, primary, kTypeNamePool[type], rng);
      if (rng.uniform() < 0.5) {
        Mention secondary{static_cast<int>(rng.uniform_int(static_cast<std::uint32_t>(cfg.types))),
                          rng.uniform() < 0.35 ? 2 : 1};
        insert_mention(s, secondary, kTypeNamePool[secondary.type], rng);
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// vocabulary
// ---------------------------------------------------------------------------

Vocabulary::Vocabulary() {
  add("<PAD>");
  add("<UNK>");
}

int Vocabulary::add(const std::string& token) {
  auto [it, inserted] = token_to_id_.emplace(token, size());
  if (inserted) {
    id_to_token_.push_back(token);
  }
  return it->second;
}

int Vocabulary::encode(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnkId : it->second;
}

Vocabulary build_vocabulary(const std::vector<Sentence>& sentences) {
  Vocabulary vocab;
  for (const Sentence& s : sentences) {
    for (const std::string& token : s.tokens) {
      vocab.add(token);
    }
  }
  return vocab;
}

}  // namespace cpfd
