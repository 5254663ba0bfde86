#include "mhaff/annotations.hpp"

#include <set>
#include <sstream>
#include <tuple>

#include "mhaff/detail/text_util.hpp"
#include "mhaff/error.hpp"

namespace mhaff {

std::vector<NoduleAnnotation> parse_annotations(std::string_view csv_text) {
  std::vector<NoduleAnnotation> out;
  std::set<std::tuple<std::string, std::int64_t, std::int64_t, std::int64_t>> seen;
  bool have_header = false;
  std::size_t line_no = 0;
  for (const auto raw : detail::split_lines(csv_text)) {
    ++line_no;
    const auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto cells = detail::split(line, ',');
    if (!have_header) {
      const std::vector<std::string> expected{"patient_id", "scan_path", "cx", "cy", "cz", "label"};
      if (cells != expected) throw Error(ErrorCode::kInvalidValue, "annotation header must be patient_id,scan_path,cx,cy,cz,label");
      have_header = true;
      continue;
    }
    if (cells.size() != 6) {
      throw Error(ErrorCode::kInvalidValue, "annotation line " + std::to_string(line_no) + ": expected 6 fields");
    }
    NoduleAnnotation a;
    a.patient_id = cells[0];
    a.scan_path = cells[1];
    std::int64_t c[4];
    for (int i = 0; i < 4; ++i) {
      if (!detail::parse_int(cells[2 + i], c[i])) {
        throw Error(ErrorCode::kInvalidValue,
                    "annotation line " + std::to_string(line_no) + ": non-integer field '" + cells[2 + i] + "'");
      }
    }
    a.center = {c[0], c[1], c[2]};
    if (c[3] < 0) throw Error(ErrorCode::kLabelOutOfRange, "negative label on line " + std::to_string(line_no));
    a.label = static_cast<int>(c[3]);
    if (!seen.emplace(a.patient_id, c[0], c[1], c[2]).second) {
      throw Error(ErrorCode::kDuplicateNodule, a.patient_id + " at (" + cells[2] + "," + cells[3] + "," + cells[4] + ")");
    }
    out.push_back(std::move(a));
  }
  if (!have_header) throw Error(ErrorCode::kInvalidValue, "annotation file has no header");
  return out;
}

std::string format_annotations(const std::vector<NoduleAnnotation>& annotations) {
  std::ostringstream os;
  os << "patient_id,scan_path,cx,cy,cz,label\n";
  for (const auto& a : annotations) {
    os << a.patient_id << ',' << a.scan_path << ',' << a.center.x << ',' << a.center.y << ',' << a.center.z << ','
       << a.label << '\n';
  }
  return os.str();
}

void check_labels(const std::vector<NoduleAnnotation>& annotations, int classes) {
  for (const auto& a : annotations) {
    if (a.label < 0 || a.label >= classes) {
      throw Error(ErrorCode::kLabelOutOfRange,
                  a.patient_id + " has label " + std::to_string(a.label) + " with m = " + std::to_string(classes));
    }
  }
}

}  // namespace mhaff

namespace mhaff {

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::kTrain;
  if (text == "val") return Split::kVal;
  if (text == "test") return Split::kTest;
  throw Error(ErrorCode::kInvalidValue, "unknown split '" + std::string(text) + "'");
}

std::vector<SplitEntry> parse_split_manifest(std::string_view csv_text) {
  std::vector<SplitEntry> out;
  std::set<std::string> seen;
  bool have_header = false;
  for (const auto raw : detail::split_lines(csv_text)) {
    const auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto cells = detail::split(line, ',');
    if (!have_header) {
      if (cells != std::vector<std::string>{"patient_id", "split"}) {
        throw Error(ErrorCode::kInvalidValue, "split manifest header must be patient_id,split");
      }
      have_header = true;
      continue;
    }
    if (cells.size() != 2) throw Error(ErrorCode::kInvalidValue, "split manifest: expected 2 fields");
    if (!seen.insert(cells[0]).second) throw Error(ErrorCode::kInvalidValue, "patient listed twice: " + cells[0]);
    out.push_back({cells[0], parse_split(cells[1])});
  }
  if (!have_header) throw Error(ErrorCode::kInvalidValue, "split manifest has no header");
  return out;
}

std::string format_split_manifest(const std::vector<SplitEntry>& entries) {
  std::ostringstream os;
  os << "patient_id,split\n";
  for (const auto& e : entries) os << e.patient_id << ',' << to_string(e.split) << '\n';
  return os.str();
}

}  // namespace mhaff
