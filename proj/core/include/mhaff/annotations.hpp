#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "mhaff/volume.hpp"

namespace mhaff {

struct NoduleAnnotation {
  std::string patient_id;
  std::string scan_path;
  Index3 center;  // voxel indices
  int label = 0;
};

// CSV with mandatory header `patient_id,scan_path,cx,cy,cz,label`.
// Lines starting with '#' are comments. Duplicate (patient_id, center) pairs are rejected.
std::vector<NoduleAnnotation> parse_annotations(std::string_view csv_text);
std::string format_annotations(const std::vector<NoduleAnnotation>& annotations);

// Throws LabelOutOfRange when any label is outside [0, classes).
void check_labels(const std::vector<NoduleAnnotation>& annotations, int classes);

}  // namespace mhaff

namespace mhaff {

enum class Split { kTrain, kVal, kTest };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct SplitEntry {
  std::string patient_id;
  Split split = Split::kTrain;
};

// CSV `patient_id,split` with split in {train,val,test}.
std::vector<SplitEntry> parse_split_manifest(std::string_view csv_text);
std::string format_split_manifest(const std::vector<SplitEntry>& entries);

}  // namespace mhaff
