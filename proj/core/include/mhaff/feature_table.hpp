#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mhaff {

// Failed or degenerate feature values. Written as "NA" on disk.
inline constexpr double kSentinel = std::numeric_limits<double>::quiet_NaN();
inline bool is_sentinel(double v) { return std::isnan(v); }

using ConfigEcho = std::map<std::string, std::string>;

// One row per nodule; the label column is kept separately and written last.
struct FeatureTable {
  std::vector<std::string> columns;
  std::vector<std::string> row_ids;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  ConfigEcho config;

  std::size_t row_count() const { return rows.size(); }
  std::optional<std::size_t> column_index(std::string_view name) const;
  std::optional<std::size_t> row_index(std::string_view id) const;
  void add_row(std::string id, std::vector<double> values, int label);
};

// Format: optional `# key = value` comment lines (config echo), then
// `patient_id,<feature columns...>,label`. Values use the shortest
// round-trip decimal form; sentinels are "NA".
FeatureTable parse_feature_table(std::string_view csv_text);
std::string format_feature_table(const FeatureTable& table);

// Shared `# key = value` echo helpers for CSV-like artifacts.
std::string format_config_comments(const ConfigEcho& config);
ConfigEcho parse_config_comments(std::string_view text);

}  // namespace mhaff
