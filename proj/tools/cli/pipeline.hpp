#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cli/config.hpp"
#include "mhaff/ablation.hpp"
#include "mhaff/annotations.hpp"
#include "mhaff/metrics.hpp"
#include "mhaff/preprocess.hpp"
#include "mhaff/screening.hpp"
#include "mhaff/train.hpp"

// Pipeline stages behind the CLI subcommands. Every stage reads and writes a
// work directory:
//   annotations.csv, splits.csv      resampled annotations and split manifest
//   resampled/<id>.mhd, lung/<id>.mhd
//   roi_cache.ckpt                   optional ROI stacks ("roi/<id>")
//   features.csv                     radiomics table
//   screening.csv, selected_features.txt
//   model.ckpt, curve.csv, report.json, predictions.csv
//   attention_summary.csv, gradcam/<id>_s<slice>.pgm
//   ablation/table.csv, ablation/rows.json, ablation/<row>_attention.csv
namespace mhaff::cli {

namespace fs = std::filesystem;

struct WorkCase {
  std::string id;  // nodule identifier: patient id, suffixed _<k> for further nodules of a patient
  NoduleAnnotation annotation;
  Split split = Split::kTrain;
};

std::vector<WorkCase> load_cases(const fs::path& annotations_csv, const fs::path& splits_csv);
std::vector<WorkCase> load_work_cases(const fs::path& work);

std::vector<NoduleAnnotation> run_phantom_gen(std::size_t count, std::size_t classes, std::uint64_t seed, const fs::path& out,
                                              std::ostream& log);
void run_preprocess(const Config& cfg, const fs::path& data, const fs::path& work, bool cache, std::ostream& log);
FeatureTable run_radiomics(const Config& cfg, const fs::path& work, std::ostream& log);
screening::ScreeningReport run_screen(const Config& cfg, const fs::path& work, std::ostream& log);

struct ModelOptions {
  model::Fusion fusion = model::Fusion::kAttention;
  bool sis = true;
  std::optional<fs::path> deep_features;  // directory of <id>.ckpt files holding "deep_features"
};

train::TrainResult run_train(const Config& cfg, const fs::path& work, const ModelOptions& options, std::ostream& log);

struct EvalOptions {
  fs::path checkpoint;
  Split split = Split::kTest;
  std::optional<fs::path> deep_features;
};

eval::MetricsReport run_eval(const Config& cfg, const fs::path& work, const EvalOptions& options, std::ostream& log);
void run_predict(const Config& cfg, const fs::path& work, const EvalOptions& options, std::ostream& log);
void run_explain(const Config& cfg, const fs::path& work, const EvalOptions& options, std::ostream& log);
std::vector<ablation::Row> run_ablate(const Config& cfg, const fs::path& work, const std::vector<std::string>& rows,
                                      std::ostream& log);

// Columns used as x^r: the screened list, or every column free of sentinels
// on the train and validation rows when screening is off.
std::vector<std::string> radiomics_columns(const FeatureTable& table, const std::vector<WorkCase>& cases, bool sis,
                                           const fs::path& work);

struct DatasetSpec {
  std::vector<std::string> columns;
  std::size_t n = 7;
  preprocess::HuWindow window;
  std::optional<fs::path> deep_features;
  model::ModelConfig model;  // consulted for precomputed deep features
};

train::Dataset build_dataset(const fs::path& work, const std::vector<WorkCase>& cases, Split split, const FeatureTable& table,
                             const DatasetSpec& spec);

}  // namespace mhaff::cli
