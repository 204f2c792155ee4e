#pragma once

#include <map>
#include <string>
#include <vector>

#include "layoutmrc/config.hpp"

namespace layoutmrc {

// Configuration/usage problem; the CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat key=value configuration; '#' starts a comment. Command-line
// --set overrides win over file values.
class RunConfig {
 public:
  static RunConfig from_file(const std::string& path);
  void apply_overrides(const std::vector<std::string>& sets);  // "key=value"

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::string get_str(const std::string& key, const std::string& dflt = "") const;
  int get_int(const std::string& key, int dflt) const;
  double get_double(const std::string& key, double dflt) const;
  bool get_bool(const std::string& key, bool dflt) const;
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  // Requires the key and that the path exists on disk.
  std::string require_path(const std::string& key) const;

  ModelConfig model_config() const;
  TrainConfig train_config() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace layoutmrc
