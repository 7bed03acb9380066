#include "cpfd/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cpfd {

void RunConfig::validate() const {
  const bool any_path = !train_path.empty() || !dev_path.empty() || !test_path.empty();
  const bool all_paths = !train_path.empty() && !dev_path.empty() && !test_path.empty();
  if (any_path && !all_paths) {
    throw std::invalid_argument("config: data.train, data.dev and data.test must be set together");
  }
  if (fg < 1 || pg < 1) {
    throw std::invalid_argument("config: fg and pg must be >= 1");
  }
  if (batch_size < 1) {
    throw std::invalid_argument("config: batch_size must be >= 1");
  }
  if (epochs < 0) {
    throw std::invalid_argument("config: epochs must be >= 0 (0 = auto)");
  }
  if (learning_rate <= 0.0) {
    throw std::invalid_argument("config: lr must be positive");
  }
  if (out_dir.empty()) {
    throw std::invalid_argument("config: out must be nonempty");
  }
  distill.validate();
}

namespace {

bool parse_bool(const std::string& value, const std::string& key) {
  if (value == "on" || value == "true" || value == "1") return true;
  if (value == "off" || value == "false" || value == "0") return false;
  throw std::invalid_argument("config: key '" + key + "' expects on/off, got '" + value + "'");
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                  ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "data.train") cfg.train_path = value;
      else if (key == "data.dev") cfg.dev_path = value;
      else if (key == "data.test") cfg.test_path = value;
      else if (key == "synthetic.types") cfg.synthetic.types = std::stoi(value);
      else if (key == "synthetic.per_type") cfg.synthetic.sentences_per_type = std::stoi(value);
      else if (key == "synthetic.vocab") cfg.synthetic.vocab_size = std::stoi(value);
      else if (key == "synthetic.seed") cfg.synthetic.seed = std::stoull(value);
      else if (key == "fg") cfg.fg = std::stoi(value);
      else if (key == "pg") cfg.pg = std::stoi(value);
      else if (key == "model.layers") cfg.model.layers = std::stoi(value);
      else if (key == "model.heads") cfg.model.heads = std::stoi(value);
      else if (key == "model.d_model") cfg.model.d_model = std::stoi(value);
      else if (key == "model.d_ff") cfg.model.d_ff = std::stoi(value);
      else if (key == "model.max_seq_len") cfg.model.max_seq_len = std::stoi(value);
      else if (key == "epochs") cfg.epochs = std::stoi(value);
      else if (key == "batch_size") cfg.batch_size = std::stoi(value);
      else if (key == "lr") cfg.learning_rate = std::stod(value);
      else if (key == "distill") cfg.distill.variant = distill_variant_from_string(value);
      else if (key == "lambda") cfg.distill.lambda = std::stod(value);
      else if (key == "kl_weight") cfg.distill.kl_weight = std::stod(value);
      else if (key == "kl_temperature") cfg.distill.kl_temperature = std::stod(value);
      else if (key == "pseudo") cfg.pseudo = pseudo_mode_from_string(value);
      else if (key == "art") cfg.art = parse_bool(value, key);
      else if (key == "art_scope") {
        if (value == "batch") cfg.art_scope = ArtScope::Batch;
        else if (value == "dataset") cfg.art_scope = ArtScope::Dataset;
        else throw std::invalid_argument("config: art_scope expects batch|dataset");
      }
      else if (key == "seed") cfg.seed = std::stoull(value);
      else if (key == "out") cfg.out_dir = value;
      else if (key == "dump_pseudo") cfg.dump_pseudo = parse_bool(value, key);
      else {
        throw std::invalid_argument("config: unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument&) {
      throw;
    } catch (const std::exception&) {
      throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                  ": bad value '" + value + "' for key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("config: cannot open " + path);
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), path);
}

std::string resolved_config_text(const RunConfig& cfg) {
  std::ostringstream out;
  out.precision(17);
  if (!cfg.uses_synthetic()) {
    out << "data.train = " << cfg.train_path << "\n";
    out << "data.dev = " << cfg.dev_path << "\n";
    out << "data.test = " << cfg.test_path << "\n";
  } else {
    out << "synthetic.types = " << cfg.synthetic.types << "\n";
    out << "synthetic.per_type = " << cfg.synthetic.sentences_per_type << "\n";
    out << "synthetic.vocab = " << cfg.synthetic.vocab_size << "\n";
    out << "synthetic.seed = " << cfg.synthetic.seed << "\n";
  }
  out << "fg = " << cfg.fg << "\n";
  out << "pg = " << cfg.pg << "\n";
  out << "model.layers = " << cfg.model.layers << "\n";
  out << "model.heads = " << cfg.model.heads << "\n";
  out << "model.d_model = " << cfg.model.d_model << "\n";
  out << "model.d_ff = " << cfg.model.d_ff << "\n";
  out << "model.max_seq_len = " << cfg.model.max_seq_len << "\n";
  out << "epochs = " << cfg.effective_epochs() << "\n";
  out << "batch_size = " << cfg.batch_size << "\n";
  out << "lr = " << cfg.learning_rate << "\n";
  out << "distill = " << to_string(cfg.distill.variant) << "\n";
  out << "lambda = " << cfg.distill.lambda << "\n";
  out << "kl_weight = " << cfg.distill.kl_weight << "\n";
  out << "kl_temperature = " << cfg.distill.kl_temperature << "\n";
  out << "pseudo = " << to_string(cfg.pseudo) << "\n";
  out << "art = " << (cfg.art ? "on" : "off") << "\n";
  out << "art_scope = " << (cfg.art_scope == ArtScope::Batch ? "batch" : "dataset") << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "out = " << cfg.out_dir << "\n";
  out << "dump_pseudo = " << (cfg.dump_pseudo ? "on" : "off") << "\n";
  return out.str();
}

}  // namespace cpfd
