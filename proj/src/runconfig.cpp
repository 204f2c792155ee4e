#include "layoutmrc/runconfig.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace layoutmrc {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  RunConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                               ": expected key=value");
    }
    cfg.values_[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return cfg;
}

void RunConfig::apply_overrides(const std::vector<std::string>& sets) {
  for (const auto& s : sets) {
    auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("--set expects key=value, got: " + s);
    }
    values_[trim(s.substr(0, eq))] = trim(s.substr(eq + 1));
  }
}

std::string RunConfig::get_str(const std::string& key,
                               const std::string& dflt) const {
  auto it = values_.find(key);
  return it == values_.end() ? dflt : it->second;
}

int RunConfig::get_int(const std::string& key, int dflt) const {
  auto it = values_.find(key);
  if (it == values_.end()) return dflt;
  try {
    return std::stoi(it->second);
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": not an integer: " + it->second);
  }
}

double RunConfig::get_double(const std::string& key, double dflt) const {
  auto it = values_.find(key);
  if (it == values_.end()) return dflt;
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": not a number: " + it->second);
  }
}

bool RunConfig::get_bool(const std::string& key, bool dflt) const {
  auto it = values_.find(key);
  if (it == values_.end()) return dflt;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw ConfigError("config key " + key + ": not a boolean: " + it->second);
}

std::string RunConfig::require_path(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end() || it->second.empty()) {
    throw ConfigError("missing required config key: " + key);
  }
  if (!std::filesystem::exists(it->second)) {
    throw ConfigError(key + ": path does not exist: " + it->second);
  }
  return it->second;
}

ModelConfig RunConfig::model_config() const {
  ModelConfig m;
  m.hidden = get_int("hidden_size", m.hidden);
  m.n_heads = get_int("n_heads", m.n_heads);
  m.n_enc_layers = get_int("n_enc_layers", m.n_enc_layers);
  m.n_dec_layers = get_int("n_dec_layers", m.n_dec_layers);
  m.ffn_dim = get_int("ffn_dim", m.ffn_dim);
  m.l_max = get_int("l_max", m.l_max);
  m.dropout = get_double("dropout", m.dropout);
  m.vocab_size = get_int("vocab_size", 8000);
  m.d_app = get_int("d_app", m.d_app);
  m.text_only = get_bool("text_only", m.text_only);
  std::string mode = get_str("position_mode", "absolute");
  if (mode == "absolute") {
    m.position_mode = PositionMode::Absolute;
  } else if (mode == "relative_bias") {
    m.position_mode = PositionMode::RelativeBias;
  } else {
    throw ConfigError("position_mode must be absolute or relative_bias");
  }
  return m;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.gamma_sal = get_double("gamma_sal", t.gamma_sal);
  t.lr = get_double("lr", t.lr);
  t.batch_size = get_int("batch_size", t.batch_size);
  t.max_epochs = get_int("max_epochs", t.max_epochs);
  t.seed = static_cast<std::uint64_t>(get_int("seed", 0));
  t.label_smooth_pos = get_double("label_smooth_pos", t.label_smooth_pos);
  t.gen_max_len = get_int("max_len", t.gen_max_len);
  return t;
}

}  // namespace layoutmrc
