#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mhaff/checkpoint.hpp"
#include "mhaff/nn/ops.hpp"
#include "mhaff/nn/optim.hpp"

namespace mhaff::model {

using nn::Array;
using nn::Graph;
using nn::ParamMap;
using nn::Tensor;

// kAttention: MHA-FF. kUniform: attention replaced by constant 1/(n+1).
// kConcat: SimpleFF. kRadiomicsOnly: logistic regression on x^r.
enum class Fusion { kAttention, kUniform, kConcat, kRadiomicsOnly };

std::string to_string(Fusion f);
Fusion parse_fusion(const std::string& s);

inline constexpr std::size_t kBackboneChannels1 = 16;
inline constexpr std::size_t kBackboneChannels2 = 32;
inline constexpr std::size_t kBackboneChannels3 = 64;

struct ModelConfig {
  std::size_t m = 3;
  std::size_t h = 4;
  std::size_t n = 7;
  std::size_t k = 10;
  std::size_t radiomics_dim = 70;
  std::size_t d_common = 128;
  std::size_t d_attn = 8;
  std::size_t backbone_dim = 128;
  std::size_t roi_side = 32;
  // Deep features are supplied as an (n, backbone_dim) matrix; no backbone parameters.
  bool precomputed = false;
  Fusion fusion = Fusion::kAttention;
  std::uint64_t seed = 0;

  // Throws InvalidValue / EvenSliceCount for inconsistent settings.
  void validate() const;
  std::size_t tokens() const { return n + 1; }

  ConfigEcho to_echo() const;
  static ModelConfig from_echo(const ConfigEcho& echo);
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Fan-in scaled uniform init: He for convolutions, Xavier for linear and
// attention weights; zero biases; layer-norm gain 1.
template <typename T>
ParamMap<T> init_params(const ModelConfig& config, std::uint64_t seed);

std::size_t parameter_count(const ParamMap<float>& params);

template <typename To, typename From>
ParamMap<To> cast_params(const ParamMap<From>& params) {
  ParamMap<To> out;
  for (const auto& [name, a] : params) out.emplace(name, Array<To>(a.shape, std::vector<To>(a.data.begin(), a.data.end())));
  return out;
}

// One sample. `image` is the ROI stack (n*side*side, slice-major) or, in
// precomputed mode, the (n, backbone_dim) deep-feature matrix.
struct ModelInput {
  std::vector<float> radiomics;
  std::vector<float> image;
};

template <typename T>
using Bound = std::map<std::string, Tensor<T>>;

// Places every parameter into `g`; trainable ones accumulate gradients.
template <typename T>
Bound<T> bind_params(Graph<T>& g, const ParamMap<T>& params, bool trainable);

// Joint softmax over tokens (t, d_c) of v^T tanh(U x_t); u (d_c, d_attn), v (d_attn).
template <typename T>
Tensor<T> attention_weights(const Tensor<T>& tokens, const Tensor<T>& u, const Tensor<T>& v);

// Convex combination of token rows.
template <typename T>
Tensor<T> fuse(const Tensor<T>& weights, const Tensor<T>& tokens) {
  return nn::weighted_rows(weights, tokens);
}

template <typename T>
struct Forward {
  Tensor<T> deep;          // x^d (n, D)
  Tensor<T> feature_maps;  // pre-GAP maps (n, 64, side/4, side/4); invalid when precomputed
  Tensor<T> radiomics_hat; // (d_c)
  Tensor<T> deep_hat;      // (n, d_c)
  std::vector<Tensor<T>> attention;  // per head (n+1)
  std::vector<Tensor<T>> fused;      // per head (d_c)
  std::vector<Tensor<T>> scores;     // per head (m)
  Tensor<T> logits;        // mean head score (m)
  Tensor<T> probs;         // softmax(logits)
};

template <typename T>
Forward<T> forward_pass(Graph<T>& g, const ModelConfig& config, const Bound<T>& params, const ModelInput& input);

// Backbone alone: (n, side, side) stack -> (n, D) embeddings.
template <typename T>
Tensor<T> backbone_forward(Graph<T>& g, const ModelConfig& config, const Bound<T>& params, const std::vector<float>& stack,
                           Tensor<T>* feature_maps = nullptr);

struct Prediction {
  std::vector<double> probs;
  std::vector<std::vector<double>> attention;  // [head][token], token 0 = radiomics
  std::vector<std::vector<double>> scores;     // [head][class]
  std::vector<std::vector<double>> fused;      // [head][d_c]
  std::size_t predicted_class() const;
};

Prediction predict(const ModelConfig& config, const ParamMap<float>& params, const ModelInput& input);

// Reads the "deep_features" tensor and checks it against the config.
std::vector<float> ingest_precomputed(const Checkpoint& file, const ModelConfig& config);

// Parameters as checkpoint tensors under "param/<name>", config merged into the echo.
void store_params(Checkpoint& ckpt, const ParamMap<float>& params);
ParamMap<float> load_params(const Checkpoint& ckpt);

}  // namespace mhaff::model
