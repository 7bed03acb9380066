#pragma once

#include <string>
#include <vector>

#include "cpfd/corpus.hpp"
#include "cpfd/model.hpp"
#include "cpfd/schema.hpp"

namespace cpfd {

// Target class for a token the pseudo-labeler chose to drop.
constexpr int kIgnoreTarget = -1;

enum class PseudoMode { None, VPL, CPL };

PseudoMode pseudo_mode_from_string(const std::string& name);
std::string to_string(PseudoMode mode);

// Shannon entropy -sum p ln p with 0 ln 0 = 0. Rejects rows that are not a
// probability distribution (tolerance 1e-6 on the total mass).
double token_entropy(const std::vector<double>& probs);

// Ties broken toward the lowest class index.
int argmax_class(const std::vector<double>& probs);

// Median: middle order statistic for odd length, mean of the two middle ones
// for even length.
double median(std::vector<double> values);

// Per-class confidence thresholds over the old model's classes. Classes whose
// group collected no tokens carry no threshold; their tokens are ignored
// under CPL.
struct ThresholdTable {
  std::vector<double> tau;
  std::vector<bool> has_tau;
  std::vector<int> group_size;

  int old_class_count() const { return static_cast<int>(tau.size()); }
};

// Groups each probability row (one per ground-truth-"O" token) under its
// argmax class and takes the median entropy per group.
ThresholdTable build_threshold_table_from_probs(
    const std::vector<std::vector<double>>& o_token_probs, int old_class_count);

// Replicates a non-"O" ground truth; for "O" tokens takes the old model's
// argmax (which may itself be "O").
int vanilla_pseudo_target(int gt_class, const std::vector<double>& old_probs);

// As vanilla, but an "O" token keeps its pseudo-label only when the old model
// is confident: entropy u strictly below the argmax class's threshold.
int confident_pseudo_target(int gt_class, const std::vector<double>& old_probs,
                            const ThresholdTable& table);

// ---------------------------------------------------------------------------
// step-level pre-pass
// ---------------------------------------------------------------------------

struct PseudoPrepass {
  ThresholdTable table;                   // populated for CPL only
  std::vector<std::vector<int>> targets;  // per sentence, per token; kIgnoreTarget drops
};

// Runs the frozen old model over the step's training sentences once and
// caches one target row per token. With mode None (or at step 1, where
// old_model is null) the targets are the ground-truth classes.
PseudoPrepass build_pseudo_targets(PseudoMode mode,
                                   const std::vector<Sentence>& train,
                                   const TaggerModel* old_model,
                                   const Vocabulary& vocab,
                                   const LabelSchema& schema);

// Figure-style debug dump: token, ground truth, and the pseudo target
// ("IGN" for dropped tokens), one block per sentence.
void dump_pseudo_targets(const std::string& path, const std::vector<Sentence>& train,
                         const PseudoPrepass& prepass, const LabelSchema& schema);

}  // namespace cpfd
