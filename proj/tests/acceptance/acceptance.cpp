// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: acceptance [--only <substring>] [--scratch <dir>]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cli/commands.hpp"
#include "cli/config.hpp"
#include "cli/pipeline.hpp"
#include "json.hpp"
#include "mhaff/ablation.hpp"
#include "mhaff/checkpoint.hpp"
#include "mhaff/detail/text_util.hpp"
#include "mhaff/explain.hpp"
#include "mhaff/metrics.hpp"
#include "mhaff/model.hpp"
#include "mhaff/preprocess.hpp"
#include "mhaff/radiomics.hpp"
#include "mhaff/screening.hpp"
#include "mhaff/volume.hpp"
#include "model_gradcheck.hpp"
#include "op_cases.hpp"
#include "radiomics_oracle.hpp"
#include "screening_oracle.hpp"
#include "temp_dir.hpp"

using namespace mhaff;
namespace fs = std::filesystem;
namespace oracle = mhaff::testing;
using Clock = std::chrono::steady_clock;

namespace {

// Collects failures; a criterion passes when none were recorded.
struct Check {
  std::vector<std::string> failures;
  void expect(bool ok, const std::string& what) {
    if (!ok && failures.size() < 8) failures.push_back(what);
  }
  bool ok() const { return failures.empty(); }
};

std::string num(double v) { return detail::format_double(v); }

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// ---------------------------------------------------------------- metrics

void metrics_replay(Check& c) {
  const auto r = eval::binary_rates(75, 16, 70, 6);
  c.expect(std::abs(r.acc - 0.8683) <= 1e-4, "Acc " + num(r.acc));
  c.expect(std::abs(r.sen - 0.8242) <= 1e-4, "Sen " + num(r.sen));
  c.expect(std::abs(r.spe - 0.9211) <= 1e-4, "Spe " + num(r.spe));
  c.expect(std::abs(r.f1 - 0.8721) <= 1e-4, "F1 " + num(r.f1));
}

// ---------------------------------------------------------------- attention simplex

model::ModelConfig random_config(Rng& rng, bool precomputed) {
  const auto pick = [&](int lo, int hi) { return static_cast<std::size_t>(rng.uniform_int(lo, hi)); };
  model::ModelConfig cfg;
  cfg.m = pick(2, 3);
  cfg.h = pick(1, 8);
  cfg.n = 2 * pick(0, 4) + 1;
  cfg.radiomics_dim = pick(1, 20);
  cfg.d_common = pick(2, 32);
  cfg.d_attn = pick(1, 8);
  cfg.backbone_dim = pick(1, 16);
  cfg.roi_side = 8;
  cfg.precomputed = precomputed;
  return cfg;
}

model::ModelInput random_input(const model::ModelConfig& cfg, Rng& rng) {
  model::ModelInput in;
  const double spread = rng.uniform(0.1, 5.0);
  for (std::size_t j = 0; j < cfg.radiomics_dim; ++j) in.radiomics.push_back(static_cast<float>(spread * rng.normal()));
  const std::size_t size = cfg.precomputed ? cfg.n * cfg.backbone_dim : cfg.n * cfg.roi_side * cfg.roi_side;
  for (std::size_t j = 0; j < size; ++j) in.image.push_back(static_cast<float>(cfg.precomputed ? spread * rng.normal() : rng.uniform()));
  return in;
}

void attention_simplex(Check& c) {
  Rng rng(2718);
  for (int t = 0; t < 1000; ++t) {
    const auto cfg = random_config(rng, t % 10 != 0);
    const auto params = model::init_params<float>(cfg, static_cast<std::uint64_t>(t));
    const auto input = random_input(cfg, rng);
    nn::Graph<float> g;
    const auto bound = model::bind_params(g, params, false);
    const auto f = model::forward_pass(g, cfg, bound, input);
    const auto r = f.radiomics_hat.value();
    const auto d = f.deep_hat.value();
    const std::size_t dc = cfg.d_common;
    for (std::size_t j = 0; j < cfg.h; ++j) {
      const auto w = f.attention[j].value();
      double total = 0;
      bool nonneg = true;
      for (float v : w) {
        total += v;
        nonneg = nonneg && v >= 0.0f;
      }
      c.expect(w.size() == cfg.n + 1, "model " + std::to_string(t) + ": head has " + std::to_string(w.size()) + " weights");
      c.expect(nonneg, "model " + std::to_string(t) + ": negative weight");
      c.expect(std::abs(total - 1.0) <= 1e-6, "model " + std::to_string(t) + ": weights sum to " + num(total));
      const auto fused = f.fused[j].value();
      for (std::size_t k = 0; k < dc; ++k) {
        float lo = r[k], hi = r[k];
        for (std::size_t i = 0; i < cfg.n; ++i) {
          lo = std::min(lo, d[i * dc + k]);
          hi = std::max(hi, d[i * dc + k]);
        }
        c.expect(fused[k] >= lo - 1e-5f && fused[k] <= hi + 1e-5f, "model " + std::to_string(t) + ": fused value outside envelope");
      }
    }
  }
}

// ---------------------------------------------------------------- gradients

void gradient_fidelity(Check& c) {
  std::size_t configs = 0;
  for (int s = 0; s < 20; ++s) {
    Rng rng(500 + static_cast<std::uint64_t>(s));
    for (auto& op : oracle::op_cases(rng)) {
      const auto r = oracle::check_gradients(op.build, op.inputs, rng);
      c.expect(r.max_rel_error < 1e-5, op.name + " config " + std::to_string(s) + ": rel error " + num(r.max_rel_error));
      c.expect(r.checked > 0, op.name + " config " + std::to_string(s) + ": no coordinate checked");
    }
    ++configs;
  }
  const model::Fusion modes[] = {model::Fusion::kAttention, model::Fusion::kUniform, model::Fusion::kConcat, model::Fusion::kRadiomicsOnly};
  for (int s = 0; s < 20; ++s) {
    Rng rng(900 + static_cast<std::uint64_t>(s));
    auto cfg = random_config(rng, s % 2 == 0);
    cfg.h = 1 + static_cast<std::size_t>(s % 4);
    cfg.n = s % 3 == 0 ? 1 : 3;
    cfg.d_common = std::min<std::size_t>(cfg.d_common, 8);
    cfg.fusion = s < 12 ? model::Fusion::kAttention : modes[s % 4];
    const auto r = oracle::check_model_gradients(cfg, 7000 + static_cast<std::uint64_t>(s));
    const std::string tag = "model config " + std::to_string(s) + " (" + model::to_string(cfg.fusion) + ")";
    c.expect(r.max_rel_error < 1e-5, tag + ": rel error " + num(r.max_rel_error));
    c.expect(r.checked >= 5 && r.checked >= 3 * r.skipped, tag + ": too few coordinates checked");
    ++configs;
  }
  c.expect(configs >= 20, "fewer than 20 configurations");
}

// ---------------------------------------------------------------- screening

void screening_oracle(Check& c) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const int classes = seed % 4 == 0 ? 3 : 2;
    const auto rt = oracle::random_screening_table(seed, classes);
    const int k = 1 + static_cast<int>(seed % 4);
    const auto report = screening::sis_select(rt.table, rt.train, rt.val, k, classes);
    const auto want = oracle::oracle_select(rt.table, rt.train, rt.val, k, classes);
    c.expect(report.scores.size() == want.auc.size(), "table " + std::to_string(seed) + ": score count");
    for (const auto& s : report.scores) {
      const auto it = want.auc.find(s.feature);
      c.expect(it != want.auc.end() && it->second == s.auc, "table " + std::to_string(seed) + ": AUC of " + s.feature);
    }
    c.expect(report.categories.size() == want.selected.size(), "table " + std::to_string(seed) + ": category count");
    for (const auto& cat : report.categories) {
      const auto it = want.selected.find(cat.category);
      c.expect(it != want.selected.end() && it->second == cat.selected, "table " + std::to_string(seed) + ": selection in " + cat.category);
    }
  }
  const auto planted = oracle::planted_table(5);
  const std::vector<std::string_view> cats{"glcm"};
  auto selected = screening::sis_select(planted.table, planted.train, planted.val, 5, 2, cats).selected_columns();
  std::sort(selected.begin(), selected.end());
  std::vector<std::string> want;
  for (int j = 0; j < 5; ++j) want.push_back("lung_glcm_planted" + std::to_string(j));
  c.expect(selected == want, "planted features not recovered");
}

// ---------------------------------------------------------------- radiomics

void radiomics_oracles(Check& c) {
  using namespace radiomics;
  using oracle::feature;
  const auto first = first_order(make_region({3, 3, 3}, std::vector<double>(27, -300.0)));
  c.expect(feature(first, "variance") == 0.0, "constant variance");
  const auto flat = oracle::make_levels({4, 4, 4}, std::vector<int>(64, 1), kDefaultBins);
  const auto glcm_flat = glcm_features(flat);
  c.expect(feature(glcm_flat, "contrast") == 0.0, "constant GLCM contrast");
  c.expect(feature(glcm_flat, "angular_second_moment") == 1.0, "constant GLCM ASM");
  c.expect(feature(ngtdm_features(flat), "contrast") == 0.0, "constant NGTDM contrast");

  const auto block = shape_features(oracle::block_region(14, 10));
  c.expect(std::abs(feature(block, "volume") - 1000.0) <= 1e-9, "block volume " + num(feature(block, "volume")));
  c.expect(std::abs(feature(block, "surface_area") - 600.0) <= 1e-9, "block surface " + num(feature(block, "surface_area")));
  c.expect(std::abs(feature(block, "sphericity") - 0.806) <= 1e-3, "block sphericity " + num(feature(block, "sphericity")));

  const auto two = oracle::make_levels({2, 2, 1}, {1, 1, 2, 2}, 2);
  const auto m = glcm_matrix(two, {1, 0, 0});
  double total = 0;
  for (const auto& row : m)
    for (double v : row) total += v;
  c.expect(m[0][0] / total == 0.5 && m[1][1] / total == 0.5, "2x2 GLCM probabilities");
  const auto g2 = glcm_features(two, {{1, 0, 0}});
  c.expect(feature(g2, "contrast") == 0.0 && feature(g2, "angular_second_moment") == 0.5, "2x2 GLCM contrast/ASM");

  const auto line = glrlm_features(oracle::make_levels({4, 1, 1}, {1, 1, 1, 1}, kDefaultBins), {{1, 0, 0}});
  c.expect(feature(line, "short_run_emphasis") == 1.0 / 16.0, "constant line SRE");
  c.expect(feature(line, "long_run_emphasis") == 16.0, "constant line LRE");
  c.expect(feature(line, "run_percentage") == 0.25, "constant line RP");
  const auto alt = glrlm_features(oracle::make_levels({4, 1, 1}, {1, 2, 1, 2}, 2), {{1, 0, 0}});
  c.expect(feature(alt, "short_run_emphasis") == 1.0 && feature(alt, "long_run_emphasis") == 1.0 &&
               feature(alt, "run_percentage") == 1.0,
           "alternating line runs");

  // Matrices against the brute-force oracles.
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto q = oracle::random_levels({6, 5, 4}, 4, seed, 0.2);
    for (const auto& d : kDirections) {
      c.expect(glcm_matrix(q, d) == oracle::oracle_glcm(q, d), "GLCM oracle");
      auto runs = glrlm_matrix(q, d), want = oracle::oracle_glrlm(q, d);
      for (auto& row : runs) row.resize(want[0].size(), 0.0);
      c.expect(runs == want, "GLRLM oracle");
    }
  }

  // Quarter-turn invariance of every 13-direction family.
  const auto close = [&](const Features& a, const Features& b, const std::string& what) {
    bool ok = a.size() == b.size();
    for (std::size_t i = 0; ok && i < a.size(); ++i) {
      if (is_sentinel(a[i].second) || is_sentinel(b[i].second)) {
        ok = is_sentinel(a[i].second) == is_sentinel(b[i].second);
        continue;
      }
      ok = std::abs(a[i].second - b[i].second) <= 1e-9 * std::max(1.0, std::abs(b[i].second));
      if (!ok) c.expect(false, what + " " + a[i].first + " " + num(a[i].second) + " vs " + num(b[i].second));
    }
    c.expect(ok, what + " rotation");
  };
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto q = oracle::random_levels({7, 7, 7}, 6, seed * 13, seed % 2 ? 0.0 : 0.2);
    for (const auto& r : {oracle::rotate_z(q), oracle::rotate_x(q), oracle::rotate_z(oracle::rotate_z(q)), oracle::rotate_x(oracle::rotate_z(q))}) {
      close(glcm_features(r), glcm_features(q), "GLCM");
      close(glrlm_features(r), glrlm_features(q), "GLRLM");
      close(glszm_features(r), glszm_features(q), "GLSZM");
      close(gldm_features(r), gldm_features(q), "GLDM");
      close(ngtdm_features(r), ngtdm_features(q), "NGTDM");
    }
  }
}

// ---------------------------------------------------------------- AUC / kappa

void auc_kappa_oracles(Check& c) {
  Rng rng(31337);
  for (int t = 0; t < 200; ++t) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(2, 80));
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.uniform_int(0, 5));
      y[i] = static_cast<int>(rng.uniform_int(0, 1));
    }
    y[0] = 0;
    y[n - 1] = 1;
    const double got = screening::auc_rank(s, y), want = oracle::pair_count_auc(s, y);
    c.expect(got == want, "set " + std::to_string(t) + ": " + num(got) + " vs " + num(want));
  }
  c.expect(eval::cohen_kappa({{20, 5}, {10, 15}}) == 0.4, "kappa 0.4");
  c.expect(eval::cohen_kappa({{10, 0, 0}, {0, 7, 0}, {0, 0, 9}}) == 1.0, "kappa 1");
  c.expect(eval::cohen_kappa({{25, 25}, {25, 25}}) == 0.0, "kappa 0");
}

// ---------------------------------------------------------------- end-to-end

struct Invocation {
  int code = 0;
  std::string err;
};

Invocation cli(const std::vector<std::string>& args) {
  std::vector<std::string> all{"mhaff"};
  all.insert(all.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : all) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, err.str()};
}

struct PipelineRun {
  fs::path data, work;
  double seconds = 0;
  bool ok = false;
};

PipelineRun run_pipeline(const fs::path& root, Check& c) {
  PipelineRun run{root / "data", root / "work"};
  const std::string data = run.data.string(), work = run.work.string();
  const std::vector<std::vector<std::string>> stages = {
      {"phantom-gen", "--count", "100", "--seed", "42", "--out", data},
      {"preprocess", "--data", data, "--work", work, "--cache"},
      {"radiomics-extract", "--work", work},
      {"screen", "--work", work},
      {"train", "--work", work, "--seed", "42"},
      {"eval", "--work", work},
      {"explain", "--work", work},
  };
  const auto t0 = Clock::now();
  for (const auto& args : stages) {
    const auto r = cli(args);
    if (r.code != 0) {
      c.expect(false, args[0] + " exited " + std::to_string(r.code) + ": " + r.err);
      return run;
    }
  }
  run.seconds = seconds_since(t0);
  run.ok = true;
  return run;
}

struct E2E {
  PipelineRun first;
  bool ran = false;
};

void end_to_end(Check& c, const fs::path& scratch, E2E& state) {
  const auto a = run_pipeline(scratch / "run_a", c);
  if (!a.ok) return;
  state.first = a;
  state.ran = true;
  const auto report = nlohmann::json::parse(read_text_file(a.work / "report.json"));
  const double acc = report.at("acc").get<double>();
  std::printf("      run A: %.1f s, test accuracy %s on %d samples\n", a.seconds, num(acc).c_str(), report.at("samples").get<int>());
  c.expect(report.at("samples").get<int>() == 60, "test split has " + report.at("samples").dump() + " samples");
  c.expect(acc >= 0.85, "test accuracy " + num(acc) + " < 0.85");
  c.expect(acc > 1.0 / 3.0, "test accuracy does not beat the majority rate");
  c.expect(a.seconds < 1200, "pipeline took " + num(a.seconds) + " s");

  const auto b = run_pipeline(scratch / "run_b", c);
  if (!b.ok) return;
  std::printf("      run B: %.1f s\n", b.seconds);
  c.expect(b.seconds < 1200, "second pipeline took " + num(b.seconds) + " s");
  c.expect(read_binary_file(a.work / "model.ckpt") == read_binary_file(b.work / "model.ckpt"), "model.ckpt differs between runs");
  c.expect(read_text_file(a.work / "report.json") == read_text_file(b.work / "report.json"), "report.json differs between runs");
}

// ---------------------------------------------------------------- ablation

void ablation_harness(Check& c, const E2E& state) {
  if (!state.ran) {
    c.expect(false, "needs the end-to-end work directory");
    return;
  }
  const auto work = state.first.work;
  const auto cfg = cli::parse_config("", {{"seed", "42"}, {"epochs", "3"}});
  std::ostringstream log;
  const auto rows = cli::run_ablate(cfg, work, {}, log);
  std::vector<std::string> names;
  for (const auto& r : rows) names.push_back(r.variant.name);
  const std::vector<std::string> want{"mhaff_x1", "mhaff_x2", "mhaff_x4", "mhaff_x8", "sis_off", "attention_off", "simpleff", "radiomics_lr"};
  c.expect(names == want, "unexpected row set");
  for (const auto& r : rows) {
    const auto& m = r.report;
    std::size_t total = 0;
    for (const auto& row : m.confusion)
      for (auto v : row) total += v;
    c.expect(m.samples == 60 && total == m.samples, r.variant.name + ": confusion does not cover the test split");
    c.expect(m.acc >= 0 && m.acc <= 1 && m.kappa >= -1 && m.kappa <= 1, r.variant.name + ": metric out of range");
    c.expect(m.curve.size() == 3, r.variant.name + ": curve length");
    if (r.variant.fusion == model::Fusion::kUniform) {
      const double uniform = 1.0 / static_cast<double>(r.variant.n + 1);
      bool exact = r.attention.heads == r.variant.h;
      for (const auto& head : r.attention.radiomics)
        for (double v : head) exact = exact && v == uniform;
      c.expect(exact, "attention-off weights are not exactly 1/(n+1)");
      const auto csv = read_text_file(work / "ablation" / (r.variant.name + "_attention.csv"));
      for (const auto& line : detail::split_lines(csv)) {
        if (line.empty() || line[0] == '#' || line.rfind("head,", 0) == 0) continue;
        const auto cells = detail::split(line, ',');
        double v = 0;
        c.expect(cells.size() == 5 && detail::parse_double(cells[3], v) && v == uniform, "exported uniform weight: " + std::string(line));
      }
    }
    if (r.variant.name == "sis_off") c.expect(r.radiomics_dim > 7 * r.variant.k, "sis_off row still screened");
  }
  const auto json = nlohmann::json::parse(read_text_file(work / "ablation" / "rows.json"));
  c.expect(json.at("rows").size() == want.size(), "rows.json row count");
  for (const auto& row : json.at("rows")) {
    const auto& rep = row.at("report");
    c.expect(rep.at("acc").is_number() && rep.at("confusion").is_array() && rep.at("curve").size() == 3,
             "rows.json report for " + row.at("name").get<std::string>());
  }
  const auto table = read_text_file(work / "ablation" / "table.csv");
  std::size_t data_lines = 0;
  for (const auto& line : detail::split_lines(table))
    if (!line.empty() && line[0] != '#') ++data_lines;
  c.expect(data_lines == want.size() + 1, "table.csv has " + std::to_string(data_lines) + " lines");
}

// ---------------------------------------------------------------- explainability

void explainability(Check& c, const E2E& state) {
  if (!state.ran) {
    c.expect(false, "needs the end-to-end work directory");
    return;
  }
  const auto& work = state.first.work;
  // Exported summary cells.
  std::size_t cells = 0;
  for (const auto& line : detail::split_lines(read_text_file(work / "attention_summary.csv"))) {
    if (line.empty() || line[0] == '#' || line.rfind("head,", 0) == 0) continue;
    const auto f = detail::split(line, ',');
    double r = 0, d = 0;
    if (f.size() != 5 || f[3] == "NA") continue;
    c.expect(detail::parse_double(f[3], r) && detail::parse_double(f[4], d) && std::abs(r + d - 1.0) <= 1e-6,
             "summary cell " + std::string(line));
    ++cells;
  }
  c.expect(cells > 0, "attention summary has no cells");

  // Grad-CAM against the generator's nodule masks.
  const auto ckpt = load_checkpoint(work / "model.ckpt");
  const auto loaded = train::from_checkpoint(ckpt);
  const auto cases = cli::load_work_cases(work);
  const auto table = parse_feature_table(read_text_file(work / "features.csv"));
  const auto columns = detail::split(ckpt.config.at("radiomics_columns"), ';');
  const cli::DatasetSpec spec{columns, loaded.config.n, preprocess::HuWindow{}, std::nullopt, loaded.config};
  const auto data = cli::build_dataset(work, cases, Split::kTest, table, spec);
  std::map<std::string, NoduleAnnotation> annotation;
  for (const auto& wc : cases) annotation[wc.id] = wc.annotation;
  const double spacing = std::stod(ckpt.config.count("spacing") ? ckpt.config.at("spacing") : "0.625");

  std::size_t localized = 0;
  for (const auto& s : data) {
    const auto maps = explain::grad_cam(loaded.config, loaded.params, train::make_input(s, loaded.standardizer),
                                        static_cast<std::size_t>(s.label));
    const auto mask = preprocess::resample_mask(read_mhd(state.first.data / "masks" / (s.id + "_nodule.mhd")), {spacing, spacing, spacing});
    const auto roi = preprocess::extract_roi_stack(mask, annotation.at(s.id), loaded.config.n, 0.0f);
    double in_sum = 0, out_sum = 0, in_n = 0, out_n = 0;
    for (std::size_t k = 0; k < maps.size(); ++k) {
      const std::size_t side = loaded.config.roi_side;
      for (std::size_t p = 0; p < side * side; ++p) {
        const double v = maps[k][p];
        c.expect(v >= 0.0 && v <= 1.0, s.id + ": heatmap value " + num(v));
        if (roi.values[k * side * side + p] > 0.5) {
          in_sum += v;
          in_n += 1;
        } else {
          out_sum += v;
          out_n += 1;
        }
      }
    }
    if (in_n > 0 && out_n > 0 && in_sum / in_n > out_sum / out_n) ++localized;
  }
  const double rate = data.empty() ? 0.0 : static_cast<double>(localized) / static_cast<double>(data.size());
  std::printf("      Grad-CAM localization: %zu of %zu test samples (%.3f)\n", localized, data.size(), rate);
  c.expect(!data.empty(), "no test samples");
  c.expect(rate >= 0.70, "localization rate " + num(rate) + " < 0.70");
}

struct Criterion {
  std::string name;
  double limit_seconds;  // 0: no limit
  std::function<void(Check&)> body;
};

}  // namespace

int main(int argc, char** argv) {
  std::string only;
  fs::path scratch_arg;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string flag = argv[i];
    if (flag == "--only") only = argv[i + 1];
    else if (flag == "--scratch") scratch_arg = argv[i + 1];
  }
  oracle::TempDir temp("acceptance");
  const fs::path scratch = scratch_arg.empty() ? temp.path() : scratch_arg;
  E2E e2e;

  const std::vector<Criterion> criteria = {
      {"metrics replay", 1, metrics_replay},
      {"attention simplex", 30, attention_simplex},
      {"gradient fidelity", 120, gradient_fidelity},
      {"screening oracle", 60, screening_oracle},
      {"radiomics oracles", 60, radiomics_oracles},
      {"auc kappa oracles", 10, auc_kappa_oracles},
      {"end-to-end phantom", 0, [&](Check& c) { end_to_end(c, scratch, e2e); }},
      {"ablation harness", 0, [&](Check& c) { ablation_harness(c, e2e); }},
      {"explainability exports", 0, [&](Check& c) { explainability(c, e2e); }},
  };

  int failed = 0;
  for (const auto& crit : criteria) {
    if (!only.empty() && crit.name.find(only) == std::string::npos &&
        !(only.find("end-to-end") == std::string::npos && (crit.name == "end-to-end phantom") &&
          (std::string("ablation harness explainability exports").find(only) != std::string::npos)))
      continue;
    Check check;
    const auto t0 = Clock::now();
    try {
      crit.body(check);
    } catch (const std::exception& e) {
      check.expect(false, std::string("exception: ") + e.what());
    }
    const double elapsed = seconds_since(t0);
    if (crit.limit_seconds > 0) check.expect(elapsed < crit.limit_seconds, "runtime " + num(elapsed) + " s over " + num(crit.limit_seconds) + " s");
    std::printf("%s %-24s (%.2f s)\n", check.ok() ? "PASS" : "FAIL", crit.name.c_str(), elapsed);
    for (const auto& f : check.failures) std::printf("      - %s\n", f.c_str());
    std::fflush(stdout);
    if (!check.ok()) ++failed;
  }
  std::printf("%d criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
