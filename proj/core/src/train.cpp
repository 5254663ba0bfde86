#include "mhaff/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mhaff/preprocess.hpp"
#include "mhaff/random.hpp"

namespace mhaff::train {

namespace {

std::uint64_t string_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void check_dataset(const Dataset& data, const model::ModelConfig& c, const char* split) {
  if (data.empty()) throw Error(ErrorCode::kEmptySplit, std::string(split) + " split is empty");
  for (const auto& s : data) {
    if (s.label < 0 || static_cast<std::size_t>(s.label) >= c.m) {
      throw Error(ErrorCode::kLabelOutOfRange, s.id + " has label " + std::to_string(s.label));
    }
  }
}

Sample augmented(const Sample& s, const model::ModelConfig& c, std::uint64_t seed, std::size_t epoch) {
  Sample out = s;
  if (c.precomputed || c.fusion == model::Fusion::kRadiomicsOnly) return out;
  preprocess::RoiStack stack;
  stack.slices = c.n;
  stack.side = c.roi_side;
  stack.values = s.image;
  Rng rng(hash_seed({seed, string_hash(s.id), epoch}));
  preprocess::apply_augment(stack, preprocess::draw_augment(rng));
  out.image = std::move(stack.values);
  return out;
}

}  // namespace

double default_lr(std::size_t classes) { return classes == 2 ? 0.001 : 0.0005; }

Standardizer Standardizer::fit(const Dataset& train) {
  Standardizer z;
  if (train.empty()) return z;
  const std::size_t d = train.front().radiomics.size();
  z.mean.assign(d, 0.0f);
  z.sd.assign(d, 1.0f);
  for (std::size_t j = 0; j < d; ++j) {
    double sum = 0;
    std::size_t count = 0;
    for (const auto& s : train)
      if (std::isfinite(s.radiomics.at(j))) {
        sum += s.radiomics[j];
        ++count;
      }
    if (count == 0) continue;
    const double mean = sum / static_cast<double>(count);
    double var = 0;
    for (const auto& s : train)
      if (std::isfinite(s.radiomics[j])) var += (s.radiomics[j] - mean) * (s.radiomics[j] - mean);
    var /= static_cast<double>(count);
    z.mean[j] = static_cast<float>(mean);
    z.sd[j] = var > 0 ? static_cast<float>(std::sqrt(var)) : 1.0f;
  }
  return z;
}

std::vector<float> Standardizer::apply(const std::vector<float>& raw) const {
  if (raw.size() != mean.size()) {
    throw Error(ErrorCode::kShapeMismatch, "radiomics vector has " + std::to_string(raw.size()) + " values, standardizer " +
                                               std::to_string(mean.size()));
  }
  std::vector<float> out(raw.size());
  for (std::size_t j = 0; j < raw.size(); ++j) out[j] = std::isfinite(raw[j]) ? (raw[j] - mean[j]) / sd[j] : 0.0f;
  return out;
}

model::ModelInput make_input(const Sample& s, const Standardizer& z) { return {z.apply(s.radiomics), s.image}; }

std::vector<model::Prediction> predict_all(const model::ModelConfig& config, const nn::ParamMap<float>& params,
                                           const Standardizer& z, const Dataset& data) {
  std::vector<model::Prediction> out;
  out.reserve(data.size());
  for (const auto& s : data) out.push_back(model::predict(config, params, make_input(s, z)));
  return out;
}

std::pair<double, double> loss_and_accuracy(const std::vector<model::Prediction>& preds, const Dataset& data) {
  double loss = 0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto label = static_cast<std::size_t>(data[i].label);
    loss -= std::log(std::max(preds[i].probs[label], 1e-300));
    std::size_t pred = preds[i].predicted_class();
    if (preds[i].probs.size() == 2) pred = preds[i].probs[1] >= 0.5 ? 1 : 0;
    if (pred == label) ++correct;
  }
  const double n = static_cast<double>(data.size());
  return {loss / n, static_cast<double>(correct) / n};
}

std::vector<std::vector<double>> probabilities(const std::vector<model::Prediction>& preds) {
  std::vector<std::vector<double>> out;
  for (const auto& p : preds) out.push_back(p.probs);
  return out;
}

std::vector<int> labels(const Dataset& data) {
  std::vector<int> out;
  for (const auto& s : data) out.push_back(s.label);
  return out;
}

TrainResult train(const Dataset& train_set, const Dataset& val_set, const TrainConfig& tc) {
  const auto& c = tc.model;
  c.validate();
  check_dataset(train_set, c, "train");
  check_dataset(val_set, c, "validation");
  if (tc.batch_size == 0) throw Error(ErrorCode::kInvalidValue, "batch size must be positive");

  TrainResult result;
  result.standardizer = Standardizer::fit(train_set);
  auto params = model::init_params<float>(c, tc.seed);
  nn::AdamState<float> state;
  nn::AdamConfig adam;
  adam.weight_decay = tc.weight_decay;
  Rng shuffle_rng(hash_seed({tc.seed, 2}));

  std::vector<model::ModelInput> val_inputs;
  for (const auto& s : val_set) val_inputs.push_back(make_input(s, result.standardizer));

  std::vector<std::size_t> order(train_set.size());
  bool have_best = false;
  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    const double lr = nn::cosine_lr(static_cast<double>(epoch), static_cast<double>(tc.epochs), tc.lr);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }
    double epoch_loss = 0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
      const std::size_t stop = std::min(order.size(), start + tc.batch_size);
      nn::GradMap<float> grads;
      for (const auto& [name, a] : params) grads[name].assign(a.size(), 0.0f);
      for (std::size_t b = start; b < stop; ++b) {
        const Sample& raw = train_set[order[b]];
        const Sample s = tc.augment ? augmented(raw, c, tc.seed, epoch) : raw;
        nn::Graph<float> g;
        const auto bound = model::bind_params(g, params, true);
        const auto f = model::forward_pass(g, c, bound, make_input(s, result.standardizer));
        const auto loss = nn::cross_entropy(f.logits, static_cast<std::size_t>(s.label));
        g.backward(loss);
        epoch_loss += loss.item();
        for (const auto& [name, t] : bound) {
          auto& acc = grads[name];
          const auto gr = t.grad();
          for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += gr[i];
        }
      }
      const float inv = 1.0f / static_cast<float>(stop - start);
      for (auto& [name, gv] : grads)
        for (auto& v : gv) v *= inv;
      nn::adam_step(params, grads, state, adam, lr);
    }

    std::vector<model::Prediction> preds;
    for (const auto& in : val_inputs) preds.push_back(model::predict(c, params, in));
    const auto [val_loss, val_acc] = loss_and_accuracy(preds, val_set);
    result.curve.push_back({epoch, lr, epoch_loss / static_cast<double>(train_set.size()), val_loss, val_acc});
    if (!have_best || val_acc > result.best_val_acc) {
      have_best = true;
      result.best_val_acc = val_acc;
      result.best_epoch = epoch;
      result.params = params;
    }
  }
  if (!have_best) result.params = params;
  return result;
}

Checkpoint to_checkpoint(const TrainResult& result, const ConfigEcho& config) {
  Checkpoint ck;
  ck.config = config;
  ck.config["best_epoch"] = std::to_string(result.best_epoch);
  model::store_params(ck, result.params);
  const std::size_t d = result.standardizer.mean.size();
  ck.tensors["standardizer/mean"] = NamedTensor{{d}, result.standardizer.mean};
  ck.tensors["standardizer/sd"] = NamedTensor{{d}, result.standardizer.sd};
  return ck;
}

LoadedModel from_checkpoint(const Checkpoint& ckpt) {
  LoadedModel out;
  out.echo = ckpt.config;
  out.config = model::ModelConfig::from_echo(ckpt.config);
  out.params = model::load_params(ckpt);
  const auto mean = ckpt.tensors.find("standardizer/mean");
  const auto sd = ckpt.tensors.find("standardizer/sd");
  if (mean == ckpt.tensors.end() || sd == ckpt.tensors.end()) {
    throw Error(ErrorCode::kMissingKey, "checkpoint lacks standardizer tensors");
  }
  out.standardizer.mean = mean->second.values;
  out.standardizer.sd = sd->second.values;
  const auto expected = model::init_params<float>(out.config, 0);
  if (expected.size() != out.params.size()) throw Error(ErrorCode::kConfigMismatch, "checkpoint parameters do not match its config");
  for (const auto& [name, a] : expected) {
    const auto it = out.params.find(name);
    if (it == out.params.end() || it->second.shape != a.shape) {
      throw Error(ErrorCode::kConfigMismatch, "checkpoint parameter " + name + " does not match its config");
    }
  }
  return out;
}

}  // namespace mhaff::train
