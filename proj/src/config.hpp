#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace batchgfn {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat, human-editable key = value configuration with a fixed typed schema.
// Unknown keys and ill-typed values are rejected at set() time; cross-field
// constraints at validate(). Defaults reproduce the reference hyperparameter
// table (SubTB lambda 0.9, epsilon 0.1, lr 0.001, batch 8, 5000 iterations,
// 20 inference samples, reward temperature 0.1, GP: 1000 epochs at lr 0.1).
class Config {
 public:
  enum class Type { kInt, kU64, kDouble, kBool, kString, kDoubleList, kStringList };

  struct KeySpec {
    std::string key;
    Type type;
    std::string default_value;
    std::string help;
  };

  static const std::vector<KeySpec>& schema();

  // All keys at their defaults.
  static Config defaults();
  // Defaults overlaid with `key = value` lines from a file ('#' comments).
  static Config from_file(const std::string& path);

  void set(const std::string& key, const std::string& value);
  const std::string& raw(const std::string& key) const;

  int get_int(const std::string& key) const;
  uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  std::vector<double> get_double_list(const std::string& key) const;
  std::vector<std::string> get_string_list(const std::string& key) const;

  // Cross-field constraint checks; throws ConfigError with an actionable
  // message naming the offending keys and values.
  void validate() const;

  // Sorted `key = value` lines; reloading them reproduces this config.
  std::string resolved_text() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace batchgfn
