#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "cpfd/rng.hpp"

namespace cpfd {

struct Sentence {
  std::vector<std::string> tokens;
  std::vector<std::string> labels;
};

// BIO label helpers. A label is "O" or "B-TYPE"/"I-TYPE" with nonempty TYPE.
bool is_wellformed_label(const std::string& label);
std::string label_type(const std::string& label);  // "" for "O"

// Column text: one "token label" pair per line, blank line between sentences,
// "-DOCSTART-" lines skipped. Lines with extra middle columns keep the first
// field as the token and the last as the label. With repair_bio an I-X that
// does not continue an X span becomes B-X; otherwise such lines are rejected.
std::vector<Sentence> read_conll(const std::string& path, bool repair_bio = true);
void write_conll(const std::string& path, const std::vector<Sentence>& sentences);

// Distinct entity types, sorted alphabetically.
std::vector<std::string> collect_entity_types(const std::vector<Sentence>& sentences);

// FG-a-PG-b decomposition of an alphabetical type list: the first step takes
// fg types, every later step takes pg.
struct StepSchedule {
  int fg = 0;
  int pg = 0;
  std::vector<std::vector<std::string>> steps;

  int step_count() const { return static_cast<int>(steps.size()); }
};

StepSchedule build_schedule(const std::vector<std::string>& types, int fg, int pg);

// Labels whose type is not in `allowed` collapse to "O".
Sentence mask_sentence(const Sentence& s, const std::vector<std::string>& allowed);
std::vector<Sentence> mask_to_types(const std::vector<Sentence>& sentences,
                                    const std::vector<std::string>& allowed);

struct StepDataset {
  int step = 0;                     // 1-based
  std::vector<Sentence> sentences;  // labels masked to this step's types
};

// Partitions the training sentences into per-step slices and masks each slice
// to its step's types. A sentence goes to the first step whose type set
// intersects its gold types; sentences without any scheduled type are dealt
// round-robin across steps.
std::vector<StepDataset> slice_and_mask(const std::vector<Sentence>& train,
                                        const StepSchedule& schedule);

struct SyntheticConfig {
  int types = 4;
  int sentences_per_type = 60;
  int vocab_size = 40;  // filler token pool
  std::uint64_t seed = 1;
};

// Template corpus where each type owns a disjoint trigger-word pool, so a
// small model can learn the types. Roughly half the sentences carry a second
// mention of a random type, which is what later gets masked to "O" and makes
// forgetting measurable.
std::vector<Sentence> generate_synthetic(const SyntheticConfig& cfg);

// Token ids. 0 is the padding id, 1 maps every unseen token.
class Vocabulary {
 public:
  static constexpr int kPadId = 0;
  static constexpr int kUnkId = 1;

  Vocabulary();
  int add(const std::string& token);       // id of token, inserting if new
  int encode(const std::string& token) const;  // kUnkId if unseen
  int size() const { return static_cast<int>(id_to_token_.size()); }
  const std::string& token(int id) const { return id_to_token_.at(id); }

 private:
  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
};

Vocabulary build_vocabulary(const std::vector<Sentence>& sentences);

}  // namespace cpfd
