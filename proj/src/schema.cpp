#include "cpfd/schema.hpp"

#include <stdexcept>

namespace cpfd {

LabelSchema LabelSchema::build(const std::vector<std::vector<std::string>>& per_step_types) {
  if (per_step_types.empty()) {
    throw std::invalid_argument("LabelSchema: no steps");
  }
  LabelSchema schema;
  schema.types_per_step_ = per_step_types;
  schema.class_names_.push_back("O");
  schema.class_step_.push_back(0);
  for (std::size_t s = 0; s < per_step_types.size(); ++s) {
    if (per_step_types[s].empty()) {
      throw std::invalid_argument("LabelSchema: step " + std::to_string(s + 1) +
                                  " introduces no types");
    }
    for (const std::string& type : per_step_types[s]) {
      schema.class_names_.push_back("B-" + type);
      schema.class_step_.push_back(static_cast<int>(s + 1));
      schema.class_names_.push_back("I-" + type);
      schema.class_step_.push_back(static_cast<int>(s + 1));
    }
  }
  return schema;
}

int LabelSchema::class_count_at(int step) const {
  if (step < 1 || step > step_count()) {
    throw std::out_of_range("LabelSchema: step " + std::to_string(step) +
                            " outside [1, " + std::to_string(step_count()) + "]");
  }
  int types = 0;
  for (int s = 0; s < step; ++s) types += static_cast<int>(types_per_step_[s].size());
  return 1 + 2 * types;
}

int LabelSchema::class_index(const std::string& label) const {
  for (std::size_t i = 0; i < class_names_.size(); ++i) {
    if (class_names_[i] == label) return static_cast<int>(i);
  }
  throw std::invalid_argument("LabelSchema: label '" + label + "' not in schema");
}

bool LabelSchema::has_label(const std::string& label) const {
  for (const std::string& name : class_names_) {
    if (name == label) return true;
  }
  return false;
}

int LabelSchema::step_of_class(int cls) const {
  return class_step_.at(cls);
}

const std::vector<std::string>& LabelSchema::types_at_step(int step) const {
  if (step < 1 || step > step_count()) {
    throw std::out_of_range("LabelSchema: step " + std::to_string(step) +
                            " outside [1, " + std::to_string(step_count()) + "]");
  }
  return types_per_step_[step - 1];
}

std::vector<std::string> LabelSchema::types_up_to(int step) const {
  std::vector<std::string> out;
  for (int s = 1; s <= step && s <= step_count(); ++s) {
    const auto& types = types_at_step(s);
    out.insert(out.end(), types.begin(), types.end());
  }
  return out;
}

}  // namespace cpfd
