#include "cli/pipeline.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "mhaff/checkpoint.hpp"
#include "mhaff/detail/text_util.hpp"
#include "mhaff/error.hpp"
#include "mhaff/explain.hpp"
#include "mhaff/phantom.hpp"
#include "mhaff/preprocess.hpp"
#include "mhaff/radiomics.hpp"
#include "mhaff/random.hpp"
#include "mhaff/volume.hpp"

namespace mhaff::cli {

namespace {

void require_file(const fs::path& p, const std::string& hint) {
  if (!fs::exists(p)) throw Error(ErrorCode::kIo, "missing " + p.string() + (hint.empty() ? "" : " (" + hint + ")"));
}

preprocess::HuWindow window_of(const Config& cfg) { return {cfg.hu_min(), cfg.hu_max()}; }

std::vector<std::string> ids_in(const std::vector<WorkCase>& cases, Split split) {
  std::vector<std::string> ids;
  for (const auto& c : cases)
    if (c.split == split) ids.push_back(c.id);
  return ids;
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

FeatureTable load_features(const Config& cfg, const fs::path& work) {
  const fs::path p = work / "features.csv";
  require_file(p, "run radiomics-extract first");
  FeatureTable table = parse_feature_table(read_text_file(p));
  check_compatible(cfg, table.config, {"bins", "spacing"});
  return table;
}

model::ModelConfig model_config(const Config& cfg, const ModelOptions& options, std::size_t radiomics_dim) {
  model::ModelConfig mc;
  mc.m = cfg.m();
  mc.h = cfg.h();
  mc.n = cfg.n();
  mc.k = cfg.k();
  mc.radiomics_dim = radiomics_dim;
  mc.d_common = cfg.d_common();
  mc.d_attn = cfg.d_attn();
  mc.backbone_dim = cfg.backbone_dim();
  mc.precomputed = options.deep_features.has_value();
  mc.fusion = options.fusion;
  mc.seed = cfg.seed().value_or(0);
  mc.validate();
  return mc;
}

train::TrainConfig train_config(const Config& cfg, const model::ModelConfig& mc) {
  train::TrainConfig tc;
  tc.model = mc;
  tc.lr = cfg.lr();
  tc.weight_decay = cfg.weight_decay();
  tc.epochs = cfg.epochs();
  tc.batch_size = cfg.batch_size();
  tc.seed = cfg.seed().value_or(0);
  return tc;
}

// ROI stacks from the cache when it matches (n, window, spacing), else from the resampled volume.
class RoiSource {
 public:
  RoiSource(const fs::path& work, std::size_t n, preprocess::HuWindow window) : work_(work), n_(n), window_(window) {
    const fs::path cache = work / "roi_cache.ckpt";
    if (!fs::exists(cache)) return;
    Checkpoint ckpt = load_checkpoint(cache);
    const auto it = ckpt.config.find("n");
    if (it == ckpt.config.end() || it->second != std::to_string(n)) return;
    if (ckpt.config["hu_min"] != detail::format_double(window.min) || ckpt.config["hu_max"] != detail::format_double(window.max)) return;
    cache_ = std::move(ckpt.tensors);
  }

  std::vector<float> stack(const WorkCase& c) const {
    if (const auto it = cache_.find("roi/" + c.id); it != cache_.end()) return it->second.values;
    const Volume hu = read_mhd(work_ / c.annotation.scan_path);
    return preprocess::extract_roi_stack(preprocess::normalize_hu(hu, window_), c.annotation, n_).values;
  }

 private:
  fs::path work_;
  std::size_t n_;
  preprocess::HuWindow window_;
  std::map<std::string, NamedTensor> cache_;
};

train::Dataset build_from(const RoiSource& rois, const std::vector<WorkCase>& cases, Split split, const FeatureTable& table,
                          const std::vector<std::string>& columns, const std::optional<fs::path>& deep_features,
                          const model::ModelConfig* mc) {
  std::vector<std::size_t> col_index;
  for (const auto& name : columns) {
    const auto ci = table.column_index(name);
    if (!ci) throw Error(ErrorCode::kMissingKey, "feature column '" + name + "' not in features.csv");
    col_index.push_back(*ci);
  }
  train::Dataset out;
  for (const auto& c : cases) {
    if (c.split != split) continue;
    const auto ri = table.row_index(c.id);
    if (!ri) throw Error(ErrorCode::kMissingKey, "nodule '" + c.id + "' not in features.csv");
    train::Sample s;
    s.id = c.id;
    s.label = c.annotation.label;
    for (auto ci : col_index) s.radiomics.push_back(static_cast<float>(table.rows[*ri][ci]));
    if (deep_features) {
      const fs::path p = *deep_features / (c.id + ".ckpt");
      require_file(p, "precomputed deep features");
      s.image = model::ingest_precomputed(load_checkpoint(p), *mc);
    } else {
      s.image = rois.stack(c);
    }
    out.push_back(std::move(s));
  }
  return out;
}

struct LoadedRun {
  train::LoadedModel model;
  std::vector<std::string> columns;
  std::vector<WorkCase> cases;
  FeatureTable table;
  Checkpoint ckpt;
};

LoadedRun load_run(const Config& cfg, const fs::path& work, const EvalOptions& options) {
  if (!fs::exists(options.checkpoint)) throw Error(ErrorCode::kIo, "checkpoint not found: " + options.checkpoint.string());
  LoadedRun run;
  run.ckpt = load_checkpoint(options.checkpoint);
  check_compatible(cfg, run.ckpt.config);
  run.model = train::from_checkpoint(run.ckpt);
  if (run.model.config.precomputed && !options.deep_features)
    throw Error(ErrorCode::kConfigMismatch, "checkpoint expects precomputed deep features (--deep-features)");
  const auto it = run.ckpt.config.find("radiomics_columns");
  if (it == run.ckpt.config.end()) throw Error(ErrorCode::kMissingKey, "radiomics_columns in checkpoint config");
  run.columns = it->second.empty() ? std::vector<std::string>{} : detail::split(it->second, ';');
  run.cases = load_work_cases(work);
  run.table = parse_feature_table(read_text_file(work / "features.csv"));
  return run;
}

train::Dataset run_dataset(const LoadedRun& run, const fs::path& work, const EvalOptions& options) {
  const auto& mc = run.model.config;
  preprocess::HuWindow window{-1000.0, 400.0};
  double v = 0;
  if (detail::parse_double(run.ckpt.config.at("hu_min"), v)) window.min = v;
  if (detail::parse_double(run.ckpt.config.at("hu_max"), v)) window.max = v;
  const RoiSource rois(work, mc.n, window);
  return build_from(rois, run.cases, options.split, run.table, run.columns, options.deep_features, &mc);
}

ConfigEcho report_echo(const ConfigEcho& ckpt_echo) {
  ConfigEcho echo = ckpt_echo;
  echo.erase("radiomics_columns");
  return echo;
}

std::uint64_t model_seed(const train::LoadedModel& m) { return m.config.seed; }

}  // namespace

std::vector<WorkCase> load_cases(const fs::path& annotations_csv, const fs::path& splits_csv) {
  require_file(annotations_csv, "");
  require_file(splits_csv, "");
  const auto annotations = parse_annotations(read_text_file(annotations_csv));
  std::map<std::string, Split> split_of;
  for (const auto& e : parse_split_manifest(read_text_file(splits_csv))) split_of[e.patient_id] = e.split;
  std::map<std::string, std::size_t> seen;
  std::vector<WorkCase> cases;
  for (const auto& a : annotations) {
    const auto it = split_of.find(a.patient_id);
    if (it == split_of.end()) throw Error(ErrorCode::kMissingKey, "patient '" + a.patient_id + "' not in split manifest");
    const std::size_t k = seen[a.patient_id]++;
    cases.push_back({k == 0 ? a.patient_id : a.patient_id + "_" + std::to_string(k), a, it->second});
  }
  return cases;
}

std::vector<WorkCase> load_work_cases(const fs::path& work) {
  return load_cases(work / "annotations.csv", work / "splits.csv");
}

std::vector<NoduleAnnotation> run_phantom_gen(std::size_t count, std::size_t classes, std::uint64_t seed, const fs::path& out,
                                              std::ostream& log) {
  phantom::Options opt;
  opt.count_per_class = count;
  opt.classes = classes;
  opt.seed = seed;
  auto annotations = write_dataset(opt, out);
  log << "phantom-gen: " << annotations.size() << " cases written to " << out.string() << "\n";
  return annotations;
}

void run_preprocess(const Config& cfg, const fs::path& data, const fs::path& work, bool cache, std::ostream& log) {
  const auto cases = load_cases(data / "annotations.csv", data / "splits.csv");
  check_labels([&] {
    std::vector<NoduleAnnotation> a;
    for (const auto& c : cases) a.push_back(c.annotation);
    return a;
  }(), static_cast<int>(cfg.m()));
  const Vec3 target{cfg.spacing(), cfg.spacing(), cfg.spacing()};
  const auto window = window_of(cfg);
  std::vector<NoduleAnnotation> out_annotations;
  std::vector<SplitEntry> splits;
  std::set<std::string> patients;
  Checkpoint roi_cache;
  roi_cache.config = cfg.echo();
  std::map<std::string, std::pair<Volume, std::string>> done;  // scan path -> (resampled, relative path)
  for (const auto& c : cases) {
    NoduleAnnotation a = c.annotation;
    const fs::path src = data / a.scan_path;
    auto it = done.find(a.scan_path);
    Index3 center;
    if (it == done.end()) {
      const Volume raw = read_mhd(src);
      Volume resampled = preprocess::resample_trilinear(raw, target);
      const std::string rel = "resampled/" + c.id + ".mhd";
      write_mhd(resampled, work / rel);
      write_mhd(preprocess::compute_lung_mask(resampled), work / "lung" / (c.id + ".mhd"));
      center = preprocess::map_center(a.center, raw.spacing(), target);
      it = done.emplace(a.scan_path, std::make_pair(std::move(resampled), rel)).first;
    } else {
      const VolumeHeader header = parse_mhd(read_text_file(src));
      center = preprocess::map_center(a.center, header.spacing, target);
    }
    a.center = center;
    a.scan_path = it->second.second;
    if (cache) {
      const auto stack = preprocess::extract_roi_stack(preprocess::normalize_hu(it->second.first, window), a, cfg.n());
      roi_cache.tensors["roi/" + c.id] = NamedTensor{{stack.slices, stack.side, stack.side}, stack.values};
    }
    out_annotations.push_back(a);
    if (patients.insert(a.patient_id).second) splits.push_back({a.patient_id, c.split});
  }
  write_text_file(work / "annotations.csv", format_config_comments(cfg.echo()) + format_annotations(out_annotations));
  write_text_file(work / "splits.csv", format_split_manifest(splits));
  if (cache) save_checkpoint(roi_cache, work / "roi_cache.ckpt");
  log << "preprocess: " << cases.size() << " nodules resampled to " << detail::format_double(cfg.spacing()) << " mm\n";
}

FeatureTable run_radiomics(const Config& cfg, const fs::path& work, std::ostream& log) {
  const auto cases = load_work_cases(work);
  FeatureTable table;
  table.columns = radiomics::all_feature_names();
  table.config = cfg.echo();
  for (const auto& c : cases) {
    const Volume hu = read_mhd(work / c.annotation.scan_path);
    const fs::path lung_path = work / "lung" / fs::path(c.annotation.scan_path).filename();
    const Volume lung = fs::exists(lung_path) ? read_mhd(lung_path) : preprocess::compute_lung_mask(hu);
    const auto features = radiomics::extract_all(hu, c.annotation, lung, cfg.bins());
    std::vector<double> values;
    values.reserve(features.size());
    for (const auto& f : features) values.push_back(f.second);
    table.add_row(c.id, std::move(values), c.annotation.label);
  }
  write_text_file(work / "features.csv", format_feature_table(table));
  log << "radiomics-extract: " << table.row_count() << " rows x " << table.columns.size() << " features\n";
  return table;
}

screening::ScreeningReport run_screen(const Config& cfg, const fs::path& work, std::ostream& log) {
  const auto table = load_features(cfg, work);
  const auto cases = load_work_cases(work);
  auto report = screening::sis_select(table, ids_in(cases, Split::kTrain), ids_in(cases, Split::kVal), static_cast<int>(cfg.k()),
                                      static_cast<int>(cfg.m()));
  write_text_file(work / "screening.csv", screening::format_report_csv(report, cfg.echo()));
  write_text_file(work / "selected_features.txt", screening::format_selected_list(report));
  log << "screen: " << report.selected_columns().size() << " of " << table.columns.size() << " features selected ("
      << report.excluded.size() << " excluded)\n";
  return report;
}

std::vector<std::string> radiomics_columns(const FeatureTable& table, const std::vector<WorkCase>& cases, bool sis,
                                           const fs::path& work) {
  if (sis) {
    const fs::path p = work / "selected_features.txt";
    require_file(p, "run screen first or pass --no-sis");
    return screening::parse_selected_list(read_text_file(p));
  }
  std::vector<std::size_t> rows;
  for (const auto& c : cases) {
    if (c.split == Split::kTest) continue;
    if (const auto ri = table.row_index(c.id)) rows.push_back(*ri);
  }
  std::vector<std::string> out;
  for (std::size_t j = 0; j < table.columns.size(); ++j) {
    const bool clean = std::none_of(rows.begin(), rows.end(), [&](std::size_t r) { return is_sentinel(table.rows[r][j]); });
    if (clean) out.push_back(table.columns[j]);
  }
  return out;
}

train::Dataset build_dataset(const fs::path& work, const std::vector<WorkCase>& cases, Split split, const FeatureTable& table,
                             const DatasetSpec& spec) {
  const RoiSource rois(work, spec.n, spec.window);
  return build_from(rois, cases, split, table, spec.columns, spec.deep_features, spec.deep_features ? &spec.model : nullptr);
}

train::TrainResult run_train(const Config& cfg, const fs::path& work, const ModelOptions& options, std::ostream& log) {
  if (!cfg.seed()) throw Error(ErrorCode::kMissingKey, "train requires --seed");
  const auto table = load_features(cfg, work);
  const auto cases = load_work_cases(work);
  if (options.sis && fs::exists(work / "screening.csv")) {
    check_compatible(cfg, parse_config_comments(read_text_file(work / "screening.csv")), {"m", "k"});
  }
  const auto columns = radiomics_columns(table, cases, options.sis, work);
  const auto mc = model_config(cfg, options, columns.size());
  DatasetSpec spec{columns, cfg.n(), window_of(cfg), options.deep_features, mc};
  const auto train_set = build_dataset(work, cases, Split::kTrain, table, spec);
  const auto val_set = build_dataset(work, cases, Split::kVal, table, spec);
  log << "train: " << train_set.size() << " train / " << val_set.size() << " val samples, " << columns.size()
      << " radiomics features, fusion " << model::to_string(mc.fusion) << "\n";
  auto result = train::train(train_set, val_set, train_config(cfg, mc));
  ConfigEcho echo = cfg.echo();
  for (const auto& [k, v] : mc.to_echo()) echo[k] = v;
  echo["sis"] = options.sis ? "on" : "off";
  echo["radiomics_columns"] = join(columns, ';');
  Checkpoint ckpt = train::to_checkpoint(result, echo);
  NamedTensor curve{{result.curve.size(), 5}, {}};
  for (const auto& r : result.curve) {
    for (double v : {static_cast<double>(r.epoch), r.lr, r.train_loss, r.val_loss, r.val_acc})
      curve.values.push_back(static_cast<float>(v));
  }
  ckpt.tensors["curve"] = std::move(curve);
  save_checkpoint(ckpt, work / "model.ckpt");
  ConfigEcho curve_echo = echo;
  curve_echo.erase("radiomics_columns");
  write_text_file(work / "curve.csv", eval::format_curve_csv(result.curve, curve_echo));
  log << "train: best epoch " << result.best_epoch << ", validation accuracy " << detail::format_double(result.best_val_acc) << "\n";
  return result;
}

eval::MetricsReport run_eval(const Config& cfg, const fs::path& work, const EvalOptions& options, std::ostream& log) {
  const auto run = load_run(cfg, work, options);
  const auto data = run_dataset(run, work, options);
  if (data.empty()) throw Error(ErrorCode::kEmptySplit, std::string(to_string(options.split)) + " split is empty");
  const auto preds = train::predict_all(run.model.config, run.model.params, run.model.standardizer, data);
  const auto labels = train::labels(data);
  auto report = eval::compute_metrics(train::probabilities(preds), labels, run.model.config.m,
                                      hash_seed({model_seed(run.model), 3}));
  if (const auto it = run.ckpt.tensors.find("curve"); it != run.ckpt.tensors.end()) {
    const auto& v = it->second.values;
    for (std::size_t i = 0; i + 5 <= v.size(); i += 5)
      report.curve.push_back({static_cast<std::size_t>(v[i]), v[i + 1], v[i + 2], v[i + 3], v[i + 4]});
  }
  report.config = report_echo(run.ckpt.config);
  write_text_file(work / "report.json", eval::to_json(report));
  log << "eval: " << to_string(options.split) << " accuracy " << detail::format_double(report.acc) << " on " << report.samples
      << " samples\n";
  return report;
}

void run_predict(const Config& cfg, const fs::path& work, const EvalOptions& options, std::ostream& log) {
  const auto run = load_run(cfg, work, options);
  const auto data = run_dataset(run, work, options);
  const auto preds = train::predict_all(run.model.config, run.model.params, run.model.standardizer, data);
  std::ostringstream os;
  os << format_config_comments(report_echo(run.ckpt.config));
  os << "id,label,predicted";
  for (std::size_t c = 0; c < run.model.config.m; ++c) os << ",p" << c;
  os << ",radiomics_weight\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    os << data[i].id << ',' << data[i].label << ',' << preds[i].predicted_class();
    for (double p : preds[i].probs) os << ',' << detail::format_double(p);
    double w = 0;
    for (const auto& head : preds[i].attention) w += head.empty() ? 0.0 : head[0];
    os << ',' << (preds[i].attention.empty() ? std::string("NA") : detail::format_double(w / static_cast<double>(preds[i].attention.size())))
       << '\n';
  }
  write_text_file(work / "predictions.csv", os.str());
  log << "predict: " << data.size() << " predictions written\n";
}

void run_explain(const Config& cfg, const fs::path& work, const EvalOptions& options, std::ostream& log) {
  const auto run = load_run(cfg, work, options);
  const auto data = run_dataset(run, work, options);
  const auto& mc = run.model.config;
  const auto preds = train::predict_all(mc, run.model.params, run.model.standardizer, data);
  const auto echo = report_echo(run.ckpt.config);
  if (mc.fusion == model::Fusion::kAttention || mc.fusion == model::Fusion::kUniform) {
    const auto summary = explain::export_attention(preds, train::labels(data), mc.h, mc.m);
    write_text_file(work / "attention_summary.csv", explain::format_attention_csv(summary, echo));
  }
  if (mc.precomputed || mc.fusion == model::Fusion::kRadiomicsOnly) {
    log << "explain: attention summary only (no image backbone)\n";
    return;
  }
  std::ostringstream index;
  index << format_config_comments(echo) << "id,label,slice,file\n";
  for (const auto& s : data) {
    const auto maps = explain::grad_cam(mc, run.model.params, train::make_input(s, run.model.standardizer),
                                        static_cast<std::size_t>(s.label));
    for (std::size_t k = 0; k < maps.size(); ++k) {
      const std::string file = s.id + "_s" + std::to_string(k) + ".pgm";
      write_text_file(work / "gradcam" / file, explain::format_pgm(maps[k], mc.roi_side));
      index << s.id << ',' << s.label << ',' << k << ',' << file << '\n';
    }
  }
  write_text_file(work / "gradcam" / "index.csv", index.str());
  log << "explain: " << data.size() << " samples, heatmaps in " << (work / "gradcam").string() << "\n";
}

std::vector<ablation::Row> run_ablate(const Config& cfg, const fs::path& work, const std::vector<std::string>& rows,
                                      std::ostream& log) {
  if (!cfg.seed()) throw Error(ErrorCode::kMissingKey, "ablate requires --seed");
  const auto table = load_features(cfg, work);
  const auto cases = load_work_cases(work);
  std::vector<ablation::Variant> grid;
  for (const auto& v : ablation::standard_grid(cfg.k(), cfg.n())) {
    if (rows.empty() || std::find(rows.begin(), rows.end(), v.name) != rows.end()) grid.push_back(v);
  }
  if (grid.empty()) throw Error(ErrorCode::kInvalidValue, "no ablation rows selected");
  const auto all_columns = radiomics_columns(table, cases, false, work);
  const ablation::DataProvider provider = [&](const ablation::Variant& v) {
    std::vector<std::string> columns = all_columns;
    if (v.sis) {
      columns = screening::sis_select(table, ids_in(cases, Split::kTrain), ids_in(cases, Split::kVal), static_cast<int>(v.k),
                                      static_cast<int>(cfg.m()))
                    .selected_columns();
    }
    DatasetSpec spec{columns, v.n, window_of(cfg), std::nullopt, {}};
    log << "ablate: " << v.name << "\n";
    return ablation::Splits{build_dataset(work, cases, Split::kTrain, table, spec),
                            build_dataset(work, cases, Split::kVal, table, spec),
                            build_dataset(work, cases, Split::kTest, table, spec)};
  };
  ModelOptions base_options;
  const auto base = train_config(cfg, model_config(cfg, base_options, all_columns.size()));
  auto result = ablation::run_ablation(grid, provider, base);
  const auto echo = cfg.echo();
  write_text_file(work / "ablation" / "table.csv", ablation::format_table_csv(result, echo));
  write_text_file(work / "ablation" / "rows.json", ablation::format_rows_json(result, echo));
  for (const auto& r : result) {
    if (r.attention.heads == 0) continue;
    write_text_file(work / "ablation" / (r.variant.name + "_attention.csv"), explain::format_attention_csv(r.attention, echo));
  }
  log << "ablate: " << result.size() << " rows written to " << (work / "ablation").string() << "\n";
  return result;
}

}  // namespace mhaff::cli
