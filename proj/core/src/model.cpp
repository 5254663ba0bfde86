#include "mhaff/model.hpp"

#include <algorithm>
#include <cmath>

#include "mhaff/detail/text_util.hpp"
#include "mhaff/random.hpp"

namespace mhaff::model {

namespace {

constexpr std::string_view kParamPrefix = "param/";

std::size_t echo_size(const ConfigEcho& echo, const std::string& key, std::size_t fallback) {
  const auto it = echo.find(key);
  if (it == echo.end()) return fallback;
  std::int64_t v = 0;
  if (!detail::parse_int(it->second, v) || v < 0) throw Error(ErrorCode::kInvalidValue, "config " + key + " = " + it->second);
  return static_cast<std::size_t>(v);
}

template <typename T>
void add_uniform(ParamMap<T>& out, Rng& rng, const std::string& name, nn::Shape shape, double bound) {
  std::vector<T> v(nn::numel(shape));
  for (auto& x : v) x = static_cast<T>(rng.uniform(-bound, bound));
  out.emplace(name, Array<T>(std::move(shape), std::move(v)));
}

template <typename T>
void add_fill(ParamMap<T>& out, const std::string& name, nn::Shape shape, T value) {
  out.emplace(name, Array<T>(std::move(shape), value));
}

double xavier(std::size_t fan_in, std::size_t fan_out) { return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)); }
double he(std::size_t fan_in) { return std::sqrt(6.0 / static_cast<double>(fan_in)); }

std::string head_name(std::size_t j, const char* what) { return "head" + std::to_string(j) + "." + what; }

template <typename T>
const Tensor<T>& get(const Bound<T>& params, const std::string& name) {
  const auto it = params.find(name);
  if (it == params.end()) throw Error(ErrorCode::kMissingKey, "model parameter " + name);
  return it->second;
}

}  // namespace

std::string to_string(Fusion f) {
  switch (f) {
    case Fusion::kAttention: return "attention";
    case Fusion::kUniform: return "uniform";
    case Fusion::kConcat: return "concat";
    case Fusion::kRadiomicsOnly: return "radiomics_only";
  }
  return "attention";
}

Fusion parse_fusion(const std::string& s) {
  for (Fusion f : {Fusion::kAttention, Fusion::kUniform, Fusion::kConcat, Fusion::kRadiomicsOnly})
    if (to_string(f) == s) return f;
  throw Error(ErrorCode::kInvalidValue, "fusion mode " + s);
}

void ModelConfig::validate() const {
  if (m != 2 && m != 3) throw Error(ErrorCode::kInvalidValue, "m must be 2 or 3, got " + std::to_string(m));
  if (h < 1) throw Error(ErrorCode::kInvalidValue, "h must be >= 1");
  if (n % 2 == 0) throw Error(ErrorCode::kEvenSliceCount, "n = " + std::to_string(n));
  if (d_common < 1 || d_attn < 1 || backbone_dim < 1 || radiomics_dim < 1) {
    throw Error(ErrorCode::kInvalidValue, "model widths must be positive");
  }
  if (roi_side == 0 || roi_side % 4 != 0) throw Error(ErrorCode::kInvalidValue, "roi side must be a positive multiple of 4");
}

ConfigEcho ModelConfig::to_echo() const {
  return {{"m", std::to_string(m)},
          {"h", std::to_string(h)},
          {"n", std::to_string(n)},
          {"k", std::to_string(k)},
          {"radiomics_dim", std::to_string(radiomics_dim)},
          {"d_common", std::to_string(d_common)},
          {"d_attn", std::to_string(d_attn)},
          {"backbone_dim", std::to_string(backbone_dim)},
          {"roi_side", std::to_string(roi_side)},
          {"precomputed", precomputed ? "1" : "0"},
          {"fusion", to_string(fusion)},
          {"seed", std::to_string(seed)}};
}

ModelConfig ModelConfig::from_echo(const ConfigEcho& echo) {
  ModelConfig c;
  c.m = echo_size(echo, "m", c.m);
  c.h = echo_size(echo, "h", c.h);
  c.n = echo_size(echo, "n", c.n);
  c.k = echo_size(echo, "k", c.k);
  c.radiomics_dim = echo_size(echo, "radiomics_dim", 7 * c.k);
  c.d_common = echo_size(echo, "d_common", c.d_common);
  c.d_attn = echo_size(echo, "d_attn", c.d_attn);
  c.backbone_dim = echo_size(echo, "backbone_dim", c.backbone_dim);
  c.roi_side = echo_size(echo, "roi_side", c.roi_side);
  c.precomputed = echo_size(echo, "precomputed", 0) != 0;
  if (auto it = echo.find("fusion"); it != echo.end()) c.fusion = parse_fusion(it->second);
  if (auto it = echo.find("seed"); it != echo.end()) {
    std::uint64_t s = 0;
    for (char ch : it->second) {
      if (ch < '0' || ch > '9') throw Error(ErrorCode::kInvalidValue, "config seed = " + it->second);
      s = s * 10 + static_cast<std::uint64_t>(ch - '0');
    }
    c.seed = s;
  }
  c.validate();
  return c;
}

template <typename T>
ParamMap<T> init_params(const ModelConfig& c, std::uint64_t seed) {
  c.validate();
  ParamMap<T> p;
  Rng rng(hash_seed({seed, 0x1417}));
  const bool needs_deep = c.fusion != Fusion::kRadiomicsOnly;
  if (needs_deep && !c.precomputed) {
    add_uniform(p, rng, "backbone.conv1.weight", {kBackboneChannels1, 1, 3, 3}, he(9));
    add_fill(p, "backbone.conv1.bias", {kBackboneChannels1}, T(0));
    add_uniform(p, rng, "backbone.conv2.weight", {kBackboneChannels2, kBackboneChannels1, 3, 3}, he(9 * kBackboneChannels1));
    add_fill(p, "backbone.conv2.bias", {kBackboneChannels2}, T(0));
    add_uniform(p, rng, "backbone.conv3.weight", {kBackboneChannels3, kBackboneChannels2, 3, 3}, he(9 * kBackboneChannels2));
    add_fill(p, "backbone.conv3.bias", {kBackboneChannels3}, T(0));
    add_uniform(p, rng, "backbone.fc.weight", {kBackboneChannels3, c.backbone_dim}, xavier(kBackboneChannels3, c.backbone_dim));
    add_fill(p, "backbone.fc.bias", {c.backbone_dim}, T(0));
  }
  if (!needs_deep) {
    add_uniform(p, rng, "lr.weight", {c.radiomics_dim, c.m}, xavier(c.radiomics_dim, c.m));
    add_fill(p, "lr.bias", {c.m}, T(0));
    return p;
  }
  add_uniform(p, rng, "proj_r.weight", {c.radiomics_dim, c.d_common}, xavier(c.radiomics_dim, c.d_common));
  add_fill(p, "proj_r.bias", {c.d_common}, T(0));
  add_fill(p, "proj_r.ln_gain", {c.d_common}, T(1));
  add_fill(p, "proj_r.ln_bias", {c.d_common}, T(0));
  add_uniform(p, rng, "proj_d.weight", {c.backbone_dim, c.d_common}, xavier(c.backbone_dim, c.d_common));
  add_fill(p, "proj_d.bias", {c.d_common}, T(0));
  add_fill(p, "proj_d.ln_gain", {c.d_common}, T(1));
  add_fill(p, "proj_d.ln_bias", {c.d_common}, T(0));
  if (c.fusion == Fusion::kConcat) {
    const std::size_t width = c.tokens() * c.d_common;
    add_uniform(p, rng, "simpleff.weight", {width, c.m}, xavier(width, c.m));
    add_fill(p, "simpleff.bias", {c.m}, T(0));
    return p;
  }
  for (std::size_t j = 0; j < c.h; ++j) {
    if (c.fusion == Fusion::kAttention) {
      add_uniform(p, rng, head_name(j, "u"), {c.d_common, c.d_attn}, xavier(c.d_common, c.d_attn));
      add_uniform(p, rng, head_name(j, "v"), {c.d_attn}, xavier(c.d_attn, 1));
    }
    add_uniform(p, rng, head_name(j, "score.weight"), {c.d_common, c.m}, xavier(c.d_common, c.m));
    add_fill(p, head_name(j, "score.bias"), {c.m}, T(0));
  }
  return p;
}

std::size_t parameter_count(const ParamMap<float>& params) {
  std::size_t total = 0;
  for (const auto& [name, a] : params) total += a.size();
  return total;
}

template <typename T>
Bound<T> bind_params(Graph<T>& g, const ParamMap<T>& params, bool trainable) {
  Bound<T> out;
  for (const auto& [name, a] : params) out.emplace(name, trainable ? g.parameter(a) : g.constant(a));
  return out;
}

template <typename T>
Tensor<T> backbone_forward(Graph<T>& g, const ModelConfig& c, const Bound<T>& p, const std::vector<float>& stack,
                           Tensor<T>* feature_maps) {
  const std::size_t s = c.roi_side;
  if (stack.size() != c.n * s * s) {
    throw Error(ErrorCode::kShapeMismatch, "ROI stack has " + std::to_string(stack.size()) + " values, expected (" +
                                               std::to_string(c.n) + "," + std::to_string(s) + "," + std::to_string(s) + ")");
  }
  auto x = g.constant({c.n, 1, s, s}, std::vector<T>(stack.begin(), stack.end()));
  x = nn::maxpool2(nn::relu(nn::conv2d(x, get(p, "backbone.conv1.weight"), get(p, "backbone.conv1.bias"))));
  x = nn::maxpool2(nn::relu(nn::conv2d(x, get(p, "backbone.conv2.weight"), get(p, "backbone.conv2.bias"))));
  x = nn::relu(nn::conv2d(x, get(p, "backbone.conv3.weight"), get(p, "backbone.conv3.bias")));
  if (feature_maps) *feature_maps = x;
  return nn::linear(nn::global_avg_pool(x), get(p, "backbone.fc.weight"), get(p, "backbone.fc.bias"));
}

template <typename T>
Tensor<T> attention_weights(const Tensor<T>& tokens, const Tensor<T>& u, const Tensor<T>& v) {
  const auto hidden = nn::tanh_act(nn::matmul(tokens, u));
  const std::size_t t = tokens.shape()[0];
  return nn::softmax(nn::reshape(nn::matmul(hidden, nn::reshape(v, {v.value().size(), 1})), {t}));
}

template <typename T>
Forward<T> forward_pass(Graph<T>& g, const ModelConfig& c, const Bound<T>& p, const ModelInput& in) {
  Forward<T> f;
  if (in.radiomics.size() != c.radiomics_dim) {
    throw Error(ErrorCode::kShapeMismatch, "radiomics vector has " + std::to_string(in.radiomics.size()) +
                                               " values, expected " + std::to_string(c.radiomics_dim));
  }
  auto xr = g.constant({c.radiomics_dim}, std::vector<T>(in.radiomics.begin(), in.radiomics.end()));
  if (c.fusion == Fusion::kRadiomicsOnly) {
    f.logits = nn::linear(xr, get(p, "lr.weight"), get(p, "lr.bias"));
    f.probs = nn::softmax(f.logits);
    return f;
  }
  if (c.precomputed) {
    if (in.image.size() != c.n * c.backbone_dim) {
      throw Error(ErrorCode::kShapeMismatch, "deep features have " + std::to_string(in.image.size()) + " values, expected (" +
                                                 std::to_string(c.n) + "," + std::to_string(c.backbone_dim) + ")");
    }
    f.deep = g.constant({c.n, c.backbone_dim}, std::vector<T>(in.image.begin(), in.image.end()));
  } else {
    f.deep = backbone_forward(g, c, p, in.image, &f.feature_maps);
  }
  f.radiomics_hat = nn::layer_norm(nn::linear(xr, get(p, "proj_r.weight"), get(p, "proj_r.bias")),
                                   get(p, "proj_r.ln_gain"), get(p, "proj_r.ln_bias"));
  f.deep_hat = nn::layer_norm(nn::linear(f.deep, get(p, "proj_d.weight"), get(p, "proj_d.bias")), get(p, "proj_d.ln_gain"),
                              get(p, "proj_d.ln_bias"));
  const auto tokens = nn::concat_rows(std::vector<Tensor<T>>{f.radiomics_hat, f.deep_hat});
  if (c.fusion == Fusion::kConcat) {
    const auto flat = nn::reshape(tokens, {c.tokens() * c.d_common});
    f.logits = nn::linear(flat, get(p, "simpleff.weight"), get(p, "simpleff.bias"));
    f.probs = nn::softmax(f.logits);
    return f;
  }
  Tensor<T> total;
  for (std::size_t j = 0; j < c.h; ++j) {
    Tensor<T> a;
    if (c.fusion == Fusion::kAttention) {
      a = attention_weights(tokens, get(p, head_name(j, "u")), get(p, head_name(j, "v")));
    } else {
      a = g.constant({c.tokens()}, std::vector<T>(c.tokens(), T(1) / static_cast<T>(c.tokens())));
    }
    const auto fused = fuse(a, tokens);
    const auto score = nn::linear(fused, get(p, head_name(j, "score.weight")), get(p, head_name(j, "score.bias")));
    f.attention.push_back(a);
    f.fused.push_back(fused);
    f.scores.push_back(score);
    total = j == 0 ? score : nn::add(total, score);
  }
  f.logits = nn::scale(total, T(1) / static_cast<T>(c.h));
  f.probs = nn::softmax(f.logits);
  return f;
}

std::size_t Prediction::predicted_class() const {
  return static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

Prediction predict(const ModelConfig& config, const ParamMap<float>& params, const ModelInput& input) {
  Graph<float> g;
  const auto bound = bind_params(g, params, false);
  const auto f = forward_pass(g, config, bound, input);
  const auto to_vec = [](const Tensor<float>& t) {
    const auto v = t.value();
    return std::vector<double>(v.begin(), v.end());
  };
  Prediction out;
  out.probs = to_vec(f.probs);
  for (const auto& t : f.attention) out.attention.push_back(to_vec(t));
  for (const auto& t : f.scores) out.scores.push_back(to_vec(t));
  for (const auto& t : f.fused) out.fused.push_back(to_vec(t));
  return out;
}

std::vector<float> ingest_precomputed(const Checkpoint& file, const ModelConfig& config) {
  const auto it = file.tensors.find("deep_features");
  if (it == file.tensors.end()) throw Error(ErrorCode::kMissingKey, "tensor deep_features");
  const auto& t = it->second;
  const std::vector<std::size_t> expected{config.n, config.backbone_dim};
  if (t.dims != expected) {
    throw Error(ErrorCode::kConfigMismatch, "deep_features shape " + nn::shape_string(t.dims) + " but config expects " +
                                                nn::shape_string(expected));
  }
  for (float v : t.values)
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidFeatureValue, "non-finite value in deep_features");
  return t.values;
}

void store_params(Checkpoint& ckpt, const ParamMap<float>& params) {
  for (const auto& [name, a] : params) ckpt.tensors[std::string(kParamPrefix) + name] = NamedTensor{a.shape, a.data};
}

ParamMap<float> load_params(const Checkpoint& ckpt) {
  ParamMap<float> out;
  for (const auto& [name, t] : ckpt.tensors)
    if (name.starts_with(kParamPrefix)) out.emplace(name.substr(kParamPrefix.size()), Array<float>(t.dims, t.values));
  return out;
}

#define MHAFF_INSTANTIATE_MODEL(T)                                                                              \
  template ParamMap<T> init_params<T>(const ModelConfig&, std::uint64_t);                                       \
  template Bound<T> bind_params<T>(Graph<T>&, const ParamMap<T>&, bool);                                               \
  template Tensor<T> backbone_forward<T>(Graph<T>&, const ModelConfig&, const Bound<T>&, const std::vector<float>&, \
                                         Tensor<T>*);                                                           \
  template Tensor<T> attention_weights<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);             \
  template Forward<T> forward_pass<T>(Graph<T>&, const ModelConfig&, const Bound<T>&, const ModelInput&);

MHAFF_INSTANTIATE_MODEL(float)
MHAFF_INSTANTIATE_MODEL(double)

#undef MHAFF_INSTANTIATE_MODEL

}  // namespace mhaff::model
