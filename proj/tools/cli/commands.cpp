#include "cli/commands.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cli/config.hpp"
#include "cli/pipeline.hpp"
#include "mhaff/error.hpp"
#include "mhaff/volume.hpp"

namespace mhaff::cli {

namespace {

struct Invocation {
  std::string config_file;
  std::map<std::string, std::string> flags;
  std::string work;
};

// Config keys become `--<key>` overrides on every pipeline subcommand.
void add_common(CLI::App* sub, Invocation& inv, bool with_work) {
  sub->add_option("--config", inv.config_file, "key = value configuration file");
  for (const auto& key : config_keys()) {
    if (is_path_key(key)) continue;
    sub->add_option("--" + key, inv.flags[key], "override '" + key + "'");
  }
  if (with_work) sub->add_option("--work", inv.work, "work directory (default: out_dir key or .)");
}

bool is_config_error(ErrorCode code) {
  return code == ErrorCode::kUnknownKey || code == ErrorCode::kEvenSliceCount ||
         (code == ErrorCode::kInvalidValue);
}

Config load_config(const Invocation& inv, CLI::App* sub) {
  std::map<std::string, std::string> overrides;
  for (const auto& [key, value] : inv.flags) {
    if (sub->count("--" + key) > 0) overrides[key] = value;
  }
  const std::string text = inv.config_file.empty() ? std::string() : read_text_file(inv.config_file);
  return parse_config(text, overrides);
}

std::filesystem::path work_dir(const Invocation& inv, const Config& cfg) {
  if (!inv.work.empty()) return inv.work;
  if (auto p = cfg.path("out_dir")) return *p;
  return ".";
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Lung nodule subtype classification with multi-head attention feature fusion", "mhaff"};
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1, 1);

  Invocation inv;
  std::size_t count = 0;
  std::size_t classes = 3;
  std::string out_dir;
  std::string data_dir;
  std::uint64_t seed = 0;
  bool cache = false;
  std::string fusion = "attention";
  bool no_sis = false;
  std::string deep_features;
  std::string checkpoint;
  std::string split = "test";
  std::vector<std::string> rows;

  auto* gen = app.add_subcommand("phantom-gen", "Generate a synthetic CT nodule dataset");
  gen->add_option("--count", count, "nodules per class")->required()->check(CLI::PositiveNumber);
  gen->add_option("--seed", seed, "random seed")->required();
  gen->add_option("--out", out_dir, "output directory")->required();
  gen->add_option("--classes", classes, "number of classes (2 or 3)")->check(CLI::IsMember({2, 3}));

  auto* pre = app.add_subcommand("preprocess", "Resample volumes, compute lung masks, optionally cache ROI stacks");
  add_common(pre, inv, true);
  pre->add_option("--data", data_dir, "dataset directory (annotations.csv, splits.csv)");
  pre->add_flag("--cache", cache, "write roi_cache.ckpt");

  auto* rad = app.add_subcommand("radiomics-extract", "Extract the radiomics feature table");
  add_common(rad, inv, true);

  auto* scr = app.add_subcommand("screen", "Category-wise sure independence screening");
  add_common(scr, inv, true);

  auto* trn = app.add_subcommand("train", "Train a fusion model");
  add_common(trn, inv, true);
  trn->get_option("--seed")->required();
  trn->add_option("--fusion", fusion, "attention | uniform | concat | radiomics_only")
      ->check(CLI::IsMember({"attention", "uniform", "concat", "radiomics_only"}));
  trn->add_flag("--no-sis", no_sis, "use every sentinel-free radiomics column");
  trn->add_option("--deep-features", deep_features, "directory of precomputed deep-feature checkpoints");

  std::vector<CLI::App*> model_cmds;
  for (const auto& [name, help] : std::vector<std::pair<std::string, std::string>>{
           {"eval", "Evaluate a checkpoint"}, {"predict", "Write per-sample predictions"},
           {"explain", "Attention summary and Grad-CAM heatmaps"}}) {
    auto* sub = app.add_subcommand(name, help);
    add_common(sub, inv, true);
    sub->add_option("--checkpoint", checkpoint, "model checkpoint (default: <work>/model.ckpt)");
    sub->add_option("--split", split, "train | val | test")->check(CLI::IsMember({"train", "val", "test"}));
    sub->add_option("--deep-features", deep_features, "directory of precomputed deep-feature checkpoints");
    model_cmds.push_back(sub);
  }

  auto* abl = app.add_subcommand("ablate", "Run the ablation grid");
  add_common(abl, inv, true);
  abl->get_option("--seed")->required();
  abl->add_option("--rows", rows, "subset of rows by name")->delimiter(',');

  if (argc <= 1) {
    err << app.help();
    return 1;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    if (sub == gen) {
      run_phantom_gen(count, classes, seed, out_dir, out);
      return 0;
    }
    Config cfg;
    try {
      cfg = load_config(inv, sub);
    } catch (const Error& e) {
      if (!is_config_error(e.code())) throw;
      err << "config error: " << e.what() << "\n";
      return 1;
    }
    const auto work = work_dir(inv, cfg);
    EvalOptions eval_options;
    eval_options.checkpoint = checkpoint.empty() ? work / "model.ckpt" : std::filesystem::path(checkpoint);
    eval_options.split = parse_split(split);
    if (!deep_features.empty()) eval_options.deep_features = deep_features;

    if (sub == pre) {
      std::filesystem::path data = data_dir;
      if (data.empty()) {
        const auto p = cfg.path("data_dir");
        if (!p) {
          err << "error: preprocess needs --data or a data_dir config key\n";
          return 1;
        }
        data = *p;
      }
      run_preprocess(cfg, data, work, cache, out);
    } else if (sub == rad) {
      run_radiomics(cfg, work, out);
    } else if (sub == scr) {
      run_screen(cfg, work, out);
    } else if (sub == trn) {
      ModelOptions options;
      options.fusion = model::parse_fusion(fusion);
      options.sis = !no_sis;
      if (!deep_features.empty()) options.deep_features = deep_features;
      run_train(cfg, work, options, out);
    } else if (sub == model_cmds[0]) {
      run_eval(cfg, work, eval_options, out);
    } else if (sub == model_cmds[1]) {
      run_predict(cfg, work, eval_options, out);
    } else if (sub == model_cmds[2]) {
      run_explain(cfg, work, eval_options, out);
    } else if (sub == abl) {
      run_ablate(cfg, work, rows, out);
    }
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace mhaff::cli
