#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mhaff/checkpoint.hpp"
#include "mhaff/metrics.hpp"
#include "mhaff/model.hpp"

namespace mhaff::train {

// One nodule. `radiomics` holds the raw selected feature values (NaN allowed);
// `image` is the ROI stack or precomputed deep-feature matrix.
struct Sample {
  std::string id;
  int label = 0;
  std::vector<float> radiomics;
  std::vector<float> image;
};
using Dataset = std::vector<Sample>;

// Per-column z-score statistics fitted on the training split.
struct Standardizer {
  std::vector<float> mean;
  std::vector<float> sd;  // 1 where the training column is constant

  static Standardizer fit(const Dataset& train);
  // Missing values map to 0 (the training mean).
  std::vector<float> apply(const std::vector<float>& raw) const;
};

struct TrainConfig {
  model::ModelConfig model;
  double lr = 0.0005;
  double weight_decay = 1e-5;
  std::size_t epochs = 50;
  std::size_t batch_size = 16;
  bool augment = true;
  std::uint64_t seed = 0;
};

double default_lr(std::size_t classes);

struct TrainResult {
  nn::ParamMap<float> params;
  Standardizer standardizer;
  std::size_t best_epoch = 0;
  double best_val_acc = 0;
  std::vector<eval::EpochRecord> curve;
};

// Mini-batch Adam with a per-epoch cosine schedule. Gradients of a batch are
// summed in sample order, so results are bit-reproducible. Returns the
// parameters of the epoch with the highest validation accuracy (earliest on ties).
TrainResult train(const Dataset& train_set, const Dataset& val_set, const TrainConfig& config);

model::ModelInput make_input(const Sample& s, const Standardizer& z);

std::vector<model::Prediction> predict_all(const model::ModelConfig& config, const nn::ParamMap<float>& params,
                                           const Standardizer& z, const Dataset& data);

// Mean cross-entropy and accuracy over a dataset.
std::pair<double, double> loss_and_accuracy(const std::vector<model::Prediction>& preds, const Dataset& data);

std::vector<std::vector<double>> probabilities(const std::vector<model::Prediction>& preds);
std::vector<int> labels(const Dataset& data);

// Checkpoint tensors: param/<name>, standardizer/mean, standardizer/sd.
Checkpoint to_checkpoint(const TrainResult& result, const ConfigEcho& config);
struct LoadedModel {
  model::ModelConfig config;
  nn::ParamMap<float> params;
  Standardizer standardizer;
  ConfigEcho echo;
};
LoadedModel from_checkpoint(const Checkpoint& ckpt);

}  // namespace mhaff::train
