#include "cli/config.hpp"

#include <algorithm>

#include "mhaff/detail/text_util.hpp"
#include "mhaff/error.hpp"

namespace mhaff::cli {

namespace {

const std::vector<std::string> kIntegerKeys = {"m", "h", "n", "k", "d_common", "d_attn", "backbone_dim", "epochs", "batch_size", "bins"};
const std::vector<std::string> kRealKeys = {"lr", "weight_decay", "hu_min", "hu_max", "spacing"};

bool contains(const std::vector<std::string>& keys, std::string_view key) {
  return std::find(keys.begin(), keys.end(), key) != keys.end();
}

std::map<std::string, std::string> defaults() {
  return {{"m", "3"},       {"h", "4"},          {"n", "7"},        {"k", "10"},          {"d_common", "128"},
          {"d_attn", "8"},  {"backbone_dim", "128"}, {"epochs", "50"}, {"batch_size", "16"}, {"bins", "32"},
          {"weight_decay", "1e-05"}, {"hu_min", "-1000"}, {"hu_max", "400"}, {"spacing", "0.625"}};
}

std::string normalize(const std::string& key, const std::string& raw) {
  const std::string text(detail::trim(raw));
  if (contains(kIntegerKeys, key)) {
    std::int64_t v = 0;
    if (!detail::parse_int(text, v) || v < 1) throw Error(ErrorCode::kInvalidValue, key + " = " + raw + " (positive integer expected)");
    return std::to_string(v);
  }
  if (contains(kRealKeys, key)) {
    double v = 0;
    if (!detail::parse_double(text, v)) throw Error(ErrorCode::kInvalidValue, key + " = " + raw + " (number expected)");
    return detail::format_double(v);
  }
  if (key == "seed") {
    if (text.empty() || text.size() > 20 || !std::all_of(text.begin(), text.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      throw Error(ErrorCode::kInvalidValue, "seed = " + raw + " (unsigned integer expected)");
    }
    std::uint64_t v = 0;
    for (char c : text) {
      const std::uint64_t next = v * 10 + static_cast<std::uint64_t>(c - '0');
      if (next / 10 != v) throw Error(ErrorCode::kInvalidValue, "seed = " + raw + " out of range");
      v = next;
    }
    return std::to_string(v);
  }
  if (text.empty()) throw Error(ErrorCode::kInvalidValue, key + " is empty");
  return text;
}

void assign(std::map<std::string, std::string>& values, std::set<std::string>& explicit_keys, const std::string& key,
            const std::string& raw) {
  if (!contains(config_keys(), key)) throw Error(ErrorCode::kUnknownKey, "unknown config key '" + key + "'");
  values[key] = normalize(key, raw);
  explicit_keys.insert(key);
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {"m",      "h",          "n",          "k",      "d_common", "d_attn",
                                                "backbone_dim", "lr",   "weight_decay", "epochs", "batch_size", "bins",
                                                "hu_min", "hu_max",     "spacing",    "seed",   "data_dir", "out_dir"};
  return keys;
}

bool is_path_key(std::string_view key) { return key == "data_dir" || key == "out_dir"; }

const std::vector<std::string>& model_keys() {
  static const std::vector<std::string> keys = {"m", "h", "n", "k", "d_common", "d_attn", "backbone_dim", "bins", "hu_min", "hu_max", "spacing"};
  return keys;
}

Config parse_config(std::string_view text, const std::map<std::string, std::string>& overrides) {
  Config c;
  c.values_ = defaults();
  std::size_t line_no = 0;
  for (auto line : detail::split_lines(text)) {
    ++line_no;
    line = detail::trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::kInvalidValue, "config line " + std::to_string(line_no) + ": expected key = value");
    }
    assign(c.values_, c.explicit_, std::string(detail::trim(line.substr(0, eq))), std::string(line.substr(eq + 1)));
  }
  for (const auto& [key, value] : overrides) assign(c.values_, c.explicit_, key, value);

  if (c.m() != 2 && c.m() != 3) throw Error(ErrorCode::kInvalidValue, "m must be 2 or 3");
  if (c.n() % 2 == 0) throw Error(ErrorCode::kEvenSliceCount, "n = " + std::to_string(c.n()) + " (slice count must be odd)");
  if (c.hu_min() >= c.hu_max()) throw Error(ErrorCode::kInvalidValue, "hu_min must be below hu_max");
  if (c.spacing() <= 0) throw Error(ErrorCode::kInvalidValue, "spacing must be positive");
  if (c.lr_missing()) c.values_["lr"] = detail::format_double(c.m() == 2 ? 0.001 : 0.0005);
  if (c.lr() < 0 || c.weight_decay() < 0) throw Error(ErrorCode::kInvalidValue, "lr and weight_decay must be non-negative");
  return c;
}

std::optional<std::uint64_t> Config::seed() const {
  const auto it = values_.find("seed");
  if (it == values_.end()) return std::nullopt;
  return std::stoull(it->second);
}

std::optional<std::string> Config::path(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

const std::string& Config::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw Error(ErrorCode::kMissingKey, "config key " + key);
  return it->second;
}

ConfigEcho Config::echo() const {
  ConfigEcho out;
  for (const auto& [k, v] : values_)
    if (!is_path_key(k)) out[k] = v;
  return out;
}

std::size_t Config::size(const std::string& key) const { return static_cast<std::size_t>(std::stoull(get(key))); }

double Config::real(const std::string& key) const {
  double v = 0;
  detail::parse_double(get(key), v);
  return v;
}

void check_compatible(const Config& config, const ConfigEcho& artifact) { check_compatible(config, artifact, model_keys()); }

void check_compatible(const Config& config, const ConfigEcho& artifact, const std::vector<std::string>& keys) {
  for (const auto& key : keys) {
    if (!config.explicit_keys().count(key)) continue;
    const auto it = artifact.find(key);
    if (it == artifact.end()) continue;
    if (it->second != config.get(key)) {
      throw Error(ErrorCode::kConfigMismatch, key + " = " + config.get(key) + " but the artifact was produced with " + key + " = " + it->second);
    }
  }
}

}  // namespace mhaff::cli
