#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mhaff/model.hpp"

namespace mhaff::explain {

// Means of the radiomics weight a^r and the summed deep weights per
// (head, true class); row head == h holds the average over heads.
struct AttentionSummary {
  std::size_t heads = 0;
  std::size_t classes = 0;
  std::vector<std::size_t> counts;                 // samples per class
  std::vector<std::vector<double>> radiomics;      // [head (+1 for all)][class]
  std::vector<std::vector<double>> deep;           // [head (+1 for all)][class]
};

AttentionSummary export_attention(const std::vector<model::Prediction>& preds, const std::vector<int>& labels,
                                  std::size_t heads, std::size_t classes);

// `head,class,count,radiomics,deep`; the cross-head average uses head "all".
// Classes without samples are written as NA.
std::string format_attention_csv(const AttentionSummary& summary, const ConfigEcho& config = {});

// Per-slice heatmaps (n maps of side x side, values in [0, 1]).
using Heatmap = std::vector<double>;
std::vector<Heatmap> grad_cam(const model::ModelConfig& config, const nn::ParamMap<float>& params,
                              const model::ModelInput& input, std::size_t target_class);

// Bilinear resize with half-pixel centres and edge clamping.
std::vector<double> resize_bilinear(const std::vector<double>& src, std::size_t in_side, std::size_t out_side);

// ASCII PGM (P2, maxval 255).
std::string format_pgm(const Heatmap& map, std::size_t side);
Heatmap parse_pgm(const std::string& text, std::size_t* side = nullptr);

}  // namespace mhaff::explain
