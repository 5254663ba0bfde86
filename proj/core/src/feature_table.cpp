#include "mhaff/feature_table.hpp"

#include <set>
#include <sstream>

#include "mhaff/detail/text_util.hpp"
#include "mhaff/error.hpp"

namespace mhaff {

std::optional<std::size_t> FeatureTable::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> FeatureTable::row_index(std::string_view id) const {
  for (std::size_t i = 0; i < row_ids.size(); ++i) {
    if (row_ids[i] == id) return i;
  }
  return std::nullopt;
}

void FeatureTable::add_row(std::string id, std::vector<double> values, int label) {
  if (values.size() != columns.size()) {
    throw Error(ErrorCode::kShapeMismatch, "row " + id + " has " + std::to_string(values.size()) +
                                               " values for " + std::to_string(columns.size()) + " columns");
  }
  row_ids.push_back(std::move(id));
  rows.push_back(std::move(values));
  labels.push_back(label);
}

std::string format_config_comments(const ConfigEcho& config) {
  std::ostringstream os;
  for (const auto& [key, value] : config) os << "# " << key << " = " << value << '\n';
  return os.str();
}

ConfigEcho parse_config_comments(std::string_view text) {
  ConfigEcho out;
  for (const auto raw : detail::split_lines(text)) {
    const auto line = detail::trim(raw);
    if (line.empty() || line.front() != '#') continue;
    const auto body = line.substr(1);
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) continue;
    out[std::string(detail::trim(body.substr(0, eq)))] = std::string(detail::trim(body.substr(eq + 1)));
  }
  return out;
}

FeatureTable parse_feature_table(std::string_view csv_text) {
  FeatureTable table;
  table.config = parse_config_comments(csv_text);
  bool have_header = false;
  std::size_t line_no = 0;
  for (const auto raw : detail::split_lines(csv_text)) {
    ++line_no;
    const auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto cells = detail::split(line, ',');
    if (!have_header) {
      if (cells.size() < 2 || cells.front() != "patient_id" || cells.back() != "label") {
        throw Error(ErrorCode::kInvalidValue, "feature table header must start with patient_id and end with label");
      }
      table.columns.assign(cells.begin() + 1, cells.end() - 1);
      std::set<std::string> unique(table.columns.begin(), table.columns.end());
      if (unique.size() != table.columns.size()) throw Error(ErrorCode::kInvalidValue, "duplicate feature column names");
      have_header = true;
      continue;
    }
    if (cells.size() != table.columns.size() + 2) {
      throw Error(ErrorCode::kInvalidValue, "feature table line " + std::to_string(line_no) + ": wrong field count");
    }
    std::vector<double> values(table.columns.size());
    for (std::size_t c = 0; c < values.size(); ++c) {
      const auto& cell = cells[c + 1];
      if (cell == "NA") {
        values[c] = kSentinel;
      } else if (!detail::parse_double(cell, values[c]) || !std::isfinite(values[c])) {
        throw Error(ErrorCode::kInvalidValue, "feature table line " + std::to_string(line_no) + ": bad value '" + cell + "'");
      }
    }
    std::int64_t label = 0;
    if (!detail::parse_int(cells.back(), label)) {
      throw Error(ErrorCode::kInvalidValue, "feature table line " + std::to_string(line_no) + ": bad label");
    }
    table.add_row(cells.front(), std::move(values), static_cast<int>(label));
  }
  if (!have_header) throw Error(ErrorCode::kInvalidValue, "feature table has no header");
  return table;
}

std::string format_feature_table(const FeatureTable& table) {
  std::ostringstream os;
  os << format_config_comments(table.config);
  os << "patient_id";
  for (const auto& c : table.columns) os << ',' << c;
  os << ",label\n";
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    os << table.row_ids[r];
    for (double v : table.rows[r]) os << ',' << (is_sentinel(v) ? std::string("NA") : detail::format_double(v));
    os << ',' << table.labels[r] << '\n';
  }
  return os.str();
}

}  // namespace mhaff
