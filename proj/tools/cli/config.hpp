#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mhaff/feature_table.hpp"

namespace mhaff::cli {

// Recognised keys. "data_dir" and "out_dir" are the path keys; they are
// locations, so they are not part of the echoed configuration.
const std::vector<std::string>& config_keys();
bool is_path_key(std::string_view key);

class Config {
 public:
  std::size_t m() const { return size("m"); }
  std::size_t h() const { return size("h"); }
  std::size_t n() const { return size("n"); }
  std::size_t k() const { return size("k"); }
  std::size_t d_common() const { return size("d_common"); }
  std::size_t d_attn() const { return size("d_attn"); }
  std::size_t backbone_dim() const { return size("backbone_dim"); }
  std::size_t epochs() const { return size("epochs"); }
  std::size_t batch_size() const { return size("batch_size"); }
  int bins() const { return static_cast<int>(size("bins")); }
  double lr() const { return real("lr"); }
  double weight_decay() const { return real("weight_decay"); }
  double hu_min() const { return real("hu_min"); }
  double hu_max() const { return real("hu_max"); }
  double spacing() const { return real("spacing"); }
  std::optional<std::uint64_t> seed() const;
  std::optional<std::string> path(const std::string& key) const;

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::string& get(const std::string& key) const;
  // Keys given in the file or as overrides (not defaults).
  const std::set<std::string>& explicit_keys() const { return explicit_; }
  // Effective hyperparameters, normalized text, path keys excluded.
  ConfigEcho echo() const;

  friend Config parse_config(std::string_view text, const std::map<std::string, std::string>& overrides);

 private:
  std::size_t size(const std::string& key) const;
  bool lr_missing() const { return values_.count("lr") == 0; }
  double real(const std::string& key) const;
  std::map<std::string, std::string> values_;
  std::set<std::string> explicit_;
};

// `key = value` lines, '#' comments. Overrides win over the file. Errors:
// UnknownKey, InvalidValue, EvenSliceCount.
Config parse_config(std::string_view text, const std::map<std::string, std::string>& overrides = {});

// Keys that must agree between a checkpoint and the invoking configuration.
const std::vector<std::string>& model_keys();

// Throws ConfigMismatch naming the first differing key among `keys` (default
// model_keys()) that the caller set explicitly.
void check_compatible(const Config& config, const ConfigEcho& artifact);
void check_compatible(const Config& config, const ConfigEcho& artifact, const std::vector<std::string>& keys);

}  // namespace mhaff::cli
