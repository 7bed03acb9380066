#pragma once

#include <string>
#include <vector>

namespace cpfd {

// The expanding BIO class space. Class 0 is always "O"; each continual step
// appends B-/I- classes for its entity types in schedule order. Partitions at
// step t: old = classes introduced before t (plus "O" where stated), new =
// classes of step t itself.
class LabelSchema {
 public:
  static constexpr int kOutside = 0;

  // per_step_types[s] lists the entity type names introduced at step s+1.
  static LabelSchema build(const std::vector<std::vector<std::string>>& per_step_types);

  int step_count() const { return static_cast<int>(types_per_step_.size()); }
  // Classes available at step t (1-based): 1 + 2 * (types introduced up to t).
  int class_count_at(int step) const;
  int total_class_count() const { return static_cast<int>(class_names_.size()); }

  const std::string& class_name(int cls) const { return class_names_.at(cls); }
  // Class index of a BIO label string ("O", "B-X", "I-X"); throws on unknown.
  int class_index(const std::string& label) const;
  bool has_label(const std::string& label) const;

  // 0 for "O", otherwise the 1-based step that introduced the class's type.
  int step_of_class(int cls) const;
  bool is_entity_class(int cls) const { return cls != kOutside; }
  bool is_old_entity_class(int cls, int step) const {
    return cls != kOutside && step_of_class(cls) < step;
  }
  bool is_new_entity_class(int cls, int step) const {
    return cls != kOutside && step_of_class(cls) == step;
  }

  const std::vector<std::string>& types_at_step(int step) const;
  // All entity types introduced at steps 1..step.
  std::vector<std::string> types_up_to(int step) const;

 private:
  std::vector<std::string> class_names_;          // index -> label
  std::vector<int> class_step_;                   // index -> introducing step (0 for O)
  std::vector<std::vector<std::string>> types_per_step_;
};

}  // namespace cpfd
