#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "mhaff/model.hpp"
#include "model_gradcheck.hpp"

using namespace mhaff;
using namespace mhaff::model;

namespace {

ModelInput random_input(const ModelConfig& c, Rng& rng) {
  ModelInput in;
  in.radiomics.resize(c.radiomics_dim);
  for (auto& v : in.radiomics) v = static_cast<float>(rng.normal());
  in.image.resize(c.precomputed ? c.n * c.backbone_dim : c.n * c.roi_side * c.roi_side);
  for (auto& v : in.image) v = static_cast<float>(rng.uniform());
  return in;
}

ModelConfig small_config() {
  ModelConfig c;
  c.m = 3;
  c.h = 3;
  c.n = 5;
  c.k = 2;
  c.radiomics_dim = 14;
  c.d_common = 16;
  c.d_attn = 4;
  c.backbone_dim = 12;
  c.roi_side = 16;
  return c;
}

std::vector<float> slice_permuted(const std::vector<float>& image, const std::vector<std::size_t>& perm, std::size_t stride) {
  std::vector<float> out(image.size());
  for (std::size_t i = 0; i < perm.size(); ++i)
    std::copy_n(image.begin() + perm[i] * stride, stride, out.begin() + i * stride);
  return out;
}

}  // namespace

TEST(Config, Validation) {
  ModelConfig c;
  EXPECT_NO_THROW(c.validate());
  c.n = 6;
  try {
    c.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEvenSliceCount);
  }
  c.n = 7;
  c.m = 4;
  EXPECT_THROW(c.validate(), Error);
  c.m = 2;
  c.h = 0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Config, EchoRoundTrip) {
  ModelConfig c = small_config();
  c.fusion = Fusion::kConcat;
  c.seed = 1234567890123ULL;
  EXPECT_EQ(ModelConfig::from_echo(c.to_echo()), c);
}

TEST(Backbone, ZeroStackZeroBiasesGivesZeroEmbeddings) {
  ModelConfig c;
  auto p = init_params<float>(c, 3);
  Graph<float> g;
  auto b = bind_params(g, p, false);
  auto x = backbone_forward(g, c, b, std::vector<float>(c.n * 32 * 32, 0.0f));
  EXPECT_EQ(x.shape(), (nn::Shape{7, 128}));
  for (float v : x.value()) EXPECT_EQ(v, 0.0f);
}

TEST(Backbone, SlicePermutationPermutesRows) {
  ModelConfig c = small_config();
  Rng rng(4);
  auto p = init_params<float>(c, 4);
  auto in = random_input(c, rng);
  const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  Graph<float> g;
  auto b = bind_params(g, p, false);
  auto a = backbone_forward(g, c, b, in.image);
  auto z = backbone_forward(g, c, b, slice_permuted(in.image, perm, c.roi_side * c.roi_side));
  const std::size_t d = c.backbone_dim;
  for (std::size_t i = 0; i < c.n; ++i)
    for (std::size_t j = 0; j < d; ++j) EXPECT_EQ(z.value()[i * d + j], a.value()[perm[i] * d + j]);
}

TEST(Backbone, WrongStackShape) {
  ModelConfig c;
  auto p = init_params<float>(c, 3);
  Graph<float> g;
  auto b = bind_params(g, p, false);
  EXPECT_THROW(backbone_forward(g, c, b, std::vector<float>(5 * 32 * 32)), Error);
}

TEST(Precomputed, AcceptsMatchingShape) {
  ModelConfig c;
  c.precomputed = true;
  Checkpoint f;
  f.tensors["deep_features"] = NamedTensor{{7, 128}, std::vector<float>(7 * 128, 0.5f)};
  EXPECT_EQ(ingest_precomputed(f, c).size(), 7u * 128u);
}

TEST(Precomputed, WideFeaturesAreConfigMismatch) {
  ModelConfig c;
  c.precomputed = true;
  Checkpoint f;
  f.tensors["deep_features"] = NamedTensor{{7, 2048}, std::vector<float>(7 * 2048, 0.5f)};
  try {
    ingest_precomputed(f, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfigMismatch);
  }
}

TEST(Precomputed, NaNRejected) {
  ModelConfig c;
  c.precomputed = true;
  Checkpoint f;
  f.tensors["deep_features"] = NamedTensor{{7, 128}, std::vector<float>(7 * 128, 0.5f)};
  f.tensors["deep_features"].values[17] = std::nanf("");
  try {
    ingest_precomputed(f, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidFeatureValue);
  }
}

TEST(Precomputed, ModelRunsWithoutBackboneParameters) {
  ModelConfig c;
  c.precomputed = true;
  auto p = init_params<float>(c, 5);
  for (const auto& [name, a] : p) EXPECT_FALSE(name.starts_with("backbone")) << name;
  Rng rng(5);
  const auto pred = predict(c, p, random_input(c, rng));
  EXPECT_EQ(pred.probs.size(), 3u);
}

TEST(Projection, DefaultWidthAndSharedSliceWeights) {
  ModelConfig c;
  auto p = init_params<float>(c, 6);
  Rng rng(6);
  auto in = random_input(c, rng);
  std::copy_n(in.image.begin(), 32 * 32, in.image.begin() + 2 * 32 * 32);
  Graph<float> g;
  auto f = forward_pass(g, c, bind_params(g, p, false), in);
  EXPECT_EQ(f.radiomics_hat.shape(), (nn::Shape{128}));
  EXPECT_EQ(f.deep_hat.shape(), (nn::Shape{7, 128}));
  for (std::size_t j = 0; j < 128; ++j) EXPECT_EQ(f.deep_hat.value()[j], f.deep_hat.value()[2 * 128 + j]);
}

TEST(Projection, ZeroWeightsGiveLayerNormOfBias) {
  ModelConfig c = small_config();
  auto p = init_params<float>(c, 7);
  std::fill(p.at("proj_r.weight").data.begin(), p.at("proj_r.weight").data.end(), 0.0f);
  auto& bias = p.at("proj_r.bias").data;
  for (std::size_t i = 0; i < bias.size(); ++i) bias[i] = static_cast<float>(i % 5) - 1.5f;
  double mean = 0, var = 0;
  for (float b : bias) mean += b;
  mean /= bias.size();
  for (float b : bias) var += (b - mean) * (b - mean);
  var /= bias.size();
  Rng rng(7);
  for (int trial = 0; trial < 3; ++trial) {
    Graph<float> g;
    auto f = forward_pass(g, c, bind_params(g, p, false), random_input(c, rng));
    for (std::size_t i = 0; i < bias.size(); ++i)
      EXPECT_NEAR(f.radiomics_hat.value()[i], (bias[i] - mean) / std::sqrt(var + 1e-5), 1e-5);
  }
}

TEST(Attention, ZeroVGivesUniform) {
  ModelConfig c;
  auto p = init_params<float>(c, 8);
  for (std::size_t j = 0; j < c.h; ++j) {
    auto& v = p.at("head" + std::to_string(j) + ".v").data;
    std::fill(v.begin(), v.end(), 0.0f);
  }
  Rng rng(8);
  const auto pred = predict(c, p, random_input(c, rng));
  for (const auto& head : pred.attention)
    for (double a : head) EXPECT_NEAR(a, 0.125, 1e-7);
}

TEST(Attention, IdenticalTokensGiveUniform) {
  Graph<double> g;
  Rng rng(9);
  std::vector<double> row(6), tokens;
  for (auto& v : row) v = rng.normal();
  for (int t = 0; t < 4; ++t) tokens.insert(tokens.end(), row.begin(), row.end());
  std::vector<double> u(6 * 3), v(3);
  for (auto& x : u) x = rng.normal();
  for (auto& x : v) x = rng.normal();
  auto a = attention_weights(g.constant({4, 6}, tokens), g.constant({6, 3}, u), g.constant({3}, v));
  for (double w : a.value()) EXPECT_NEAR(w, 0.25, 1e-15);
}

TEST(Attention, EngineeredLogitsGiveThreeToOne) {
  Graph<double> g;
  // tanh(U x_r) = 0.5, tanh(U x_d) = 0, v = 2 ln 3 -> logits (ln 3, 0)
  auto tokens = g.constant({2, 2}, {1, 0, 0, 0});
  auto u = g.constant({2, 1}, {std::atanh(0.5), 0});
  auto v = g.constant({1}, {2 * std::log(3.0)});
  auto a = attention_weights(tokens, u, v);
  EXPECT_NEAR(a.value()[0], 0.75, 1e-12);
  EXPECT_NEAR(a.value()[1], 0.25, 1e-12);
}

TEST(Fuse, OneHotSelectsRadiomicsToken) {
  Graph<double> g;
  auto tokens = g.constant({3, 2}, {1, 2, 3, 4, 5, 6});
  auto f = fuse(g.constant({3}, {1, 0, 0}), tokens);
  EXPECT_EQ(std::vector<double>(f.value().begin(), f.value().end()), (std::vector<double>{1, 2}));
}

TEST(Fuse, EqualTokensAreFixedPoint) {
  Graph<double> g;
  auto tokens = g.constant({3, 2}, {0.5, -2, 0.5, -2, 0.5, -2});
  auto f = fuse(g.constant({3}, {0.2, 0.3, 0.5}), tokens);
  EXPECT_NEAR(f.value()[0], 0.5, 1e-15);
  EXPECT_NEAR(f.value()[1], -2, 1e-15);
}

TEST(Fuse, StaysInsideTokenEnvelope) {
  Rng rng(10);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t t = 2 + static_cast<std::size_t>(rng.uniform_int(0, 8));
    const std::size_t d = 1 + static_cast<std::size_t>(rng.uniform_int(0, 10));
    std::vector<float> tok(t * d), logits(t);
    for (auto& v : tok) v = static_cast<float>(rng.uniform(-3, 3));
    for (auto& v : logits) v = static_cast<float>(rng.uniform(-4, 4));
    Graph<float> g;
    auto tokens = g.constant({t, d}, tok);
    auto f = fuse(nn::softmax(g.constant({t}, logits)), tokens);
    for (std::size_t j = 0; j < d; ++j) {
      float lo = tok[j], hi = tok[j];
      for (std::size_t i = 1; i < t; ++i) {
        lo = std::min(lo, tok[i * d + j]);
        hi = std::max(hi, tok[i * d + j]);
      }
      EXPECT_GE(f.value()[j], lo - 1e-5f);
      EXPECT_LE(f.value()[j], hi + 1e-5f);
    }
  }
}

TEST(Predict, IdenticalHeadsMatchSingleHead) {
  ModelConfig c = small_config();
  auto p = init_params<float>(c, 11);
  for (std::size_t j = 1; j < c.h; ++j)
    for (const char* part : {".u", ".v", ".score.weight", ".score.bias"})
      p.at("head" + std::to_string(j) + part) = p.at(std::string("head0") + part);
  Rng rng(11);
  const auto in = random_input(c, rng);
  Graph<float> g;
  auto f = forward_pass(g, c, bind_params(g, p, false), in);
  for (std::size_t i = 0; i < c.m; ++i) EXPECT_NEAR(f.logits.value()[i], f.scores[0].value()[i], 1e-6);
}

TEST(Predict, SingleHeadIsItsOwnScore) {
  ModelConfig c = small_config();
  c.h = 1;
  auto p = init_params<float>(c, 12);
  Rng rng(12);
  Graph<float> g;
  auto f = forward_pass(g, c, bind_params(g, p, false), random_input(c, rng));
  ASSERT_EQ(f.scores.size(), 1u);
  for (std::size_t i = 0; i < c.m; ++i) EXPECT_EQ(f.logits.value()[i], f.scores[0].value()[i]);
}

TEST(Predict, ProbabilitiesAndWeightsOnSimplex) {
  Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    ModelConfig c = small_config();
    c.h = 1 + static_cast<std::size_t>(rng.uniform_int(0, 3));
    c.m = rng.bernoulli(0.5) ? 2 : 3;
    auto p = init_params<float>(c, rng.next_u64());
    const auto pred = predict(c, p, random_input(c, rng));
    double total = 0;
    for (double v : pred.probs) total += v;
    EXPECT_NEAR(total, 1.0, 1e-6);
    ASSERT_EQ(pred.attention.size(), c.h);
    for (const auto& head : pred.attention) {
      ASSERT_EQ(head.size(), c.n + 1);
      double s = 0;
      for (double a : head) {
        EXPECT_GE(a, 0.0);
        s += a;
      }
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
  }
}

TEST(Predict, ShiftingAllHeadScoresLeavesProbabilities) {
  ModelConfig c = small_config();
  auto p = init_params<float>(c, 14);
  Rng rng(14);
  const auto in = random_input(c, rng);
  const auto base = predict(c, p, in);
  for (std::size_t j = 0; j < c.h; ++j)
    for (auto& b : p.at("head" + std::to_string(j) + ".score.bias").data) b += 2.5f;
  const auto shifted = predict(c, p, in);
  for (std::size_t i = 0; i < c.m; ++i) EXPECT_NEAR(base.probs[i], shifted.probs[i], 1e-6);
}

TEST(Predict, SlicePermutationEquivariance) {
  ModelConfig c = small_config();
  Rng rng(15);
  auto p = init_params<float>(c, 15);
  const auto in = random_input(c, rng);
  const std::vector<std::size_t> perm{4, 2, 0, 3, 1};
  ModelInput permuted = in;
  permuted.image = slice_permuted(in.image, perm, c.roi_side * c.roi_side);
  const auto a = predict(c, p, in);
  const auto b = predict(c, p, permuted);
  for (std::size_t j = 0; j < c.h; ++j) {
    EXPECT_NEAR(b.attention[j][0], a.attention[j][0], 1e-6);
    for (std::size_t i = 0; i < c.n; ++i) EXPECT_NEAR(b.attention[j][1 + i], a.attention[j][1 + perm[i]], 1e-6);
    for (std::size_t d = 0; d < c.d_common; ++d) EXPECT_NEAR(b.fused[j][d], a.fused[j][d], 1e-5);
    for (std::size_t k = 0; k < c.m; ++k) EXPECT_NEAR(b.scores[j][k], a.scores[j][k], 1e-5);
  }
  for (std::size_t k = 0; k < c.m; ++k) EXPECT_NEAR(b.probs[k], a.probs[k], 1e-6);
}

TEST(Predict, UniformFusionHasConstantWeights) {
  ModelConfig c;
  c.fusion = Fusion::kUniform;
  auto p = init_params<float>(c, 16);
  Rng rng(16);
  const auto pred = predict(c, p, random_input(c, rng));
  for (const auto& head : pred.attention)
    for (double a : head) EXPECT_EQ(a, static_cast<double>(1.0f / 8.0f));
}

TEST(SimpleFF, ShapesAndZeroWeights) {
  ModelConfig c;
  c.fusion = Fusion::kConcat;
  auto p = init_params<float>(c, 17);
  EXPECT_EQ(p.at("simpleff.weight").shape, (nn::Shape{1024, 3}));
  Rng rng(17);
  const auto in = random_input(c, rng);
  double total = 0;
  for (double v : predict(c, p, in).probs) total += v;
  EXPECT_NEAR(total, 1.0, 1e-6);
  std::fill(p.at("simpleff.weight").data.begin(), p.at("simpleff.weight").data.end(), 0.0f);
  for (double v : predict(c, p, in).probs) EXPECT_NEAR(v, 1.0 / 3.0, 1e-7);
}

TEST(Init, SameSeedBitIdentical) {
  ModelConfig c;
  EXPECT_EQ(init_params<float>(c, 99), init_params<float>(c, 99));
  EXPECT_NE(init_params<float>(c, 99), init_params<float>(c, 100));
}

TEST(Init, LayerNormGainsAreOnesAndBiasesZero) {
  ModelConfig c;
  auto p = init_params<float>(c, 1);
  for (const char* name : {"proj_r.ln_gain", "proj_d.ln_gain"})
    for (float v : p.at(name).data) EXPECT_EQ(v, 1.0f);
  for (const auto& [name, a] : p)
    if (name.ends_with("bias"))
      for (float v : a.data) EXPECT_EQ(v, 0.0f) << name;
}

TEST(Init, ParameterCensus) {
  ModelConfig c;
  const std::size_t m = 3, h = 4, k = 10, D = 128, dc = 128, da = 8;
  const std::size_t backbone = (16 * 1 * 9 + 16) + (32 * 16 * 9 + 32) + (64 * 32 * 9 + 64) + (64 * D + D);
  const std::size_t proj = (7 * k * dc + 3 * dc) + (D * dc + 3 * dc);
  const std::size_t heads = h * (dc * da + da + dc * m + m);
  EXPECT_EQ(backbone + proj + heads, 63404u);
  EXPECT_EQ(parameter_count(init_params<float>(c, 1)), 63404u);
}

TEST(Checkpoint, ParamsRoundTrip) {
  ModelConfig c = small_config();
  auto p = init_params<float>(c, 18);
  Checkpoint ck;
  ck.config = c.to_echo();
  store_params(ck, p);
  ck.tensors["other"] = NamedTensor{{1}, {1.0f}};
  const auto back = read_checkpoint(write_checkpoint(ck));
  EXPECT_EQ(load_params(back), p);
  EXPECT_EQ(ModelConfig::from_echo(back.config), c);
}

class ModelGradient : public ::testing::TestWithParam<int> {};

TEST_P(ModelGradient, EndToEndLossMatchesFiniteDifferences) {
  ModelConfig c;
  c.m = GetParam() % 2 ? 2 : 3;
  c.h = 1 + GetParam() % 3;
  c.n = 3;
  c.radiomics_dim = 4;
  c.d_common = 6;
  c.d_attn = 3;
  c.backbone_dim = 5;
  c.roi_side = 8;
  const Fusion modes[] = {Fusion::kAttention, Fusion::kConcat, Fusion::kUniform, Fusion::kRadiomicsOnly};
  c.fusion = modes[GetParam() % 4];
  const auto r = mhaff::testing::check_model_gradients(c, 1000 + GetParam());
  EXPECT_LT(r.max_rel_error, 1e-5);
  EXPECT_GE(r.checked, 5u);
  EXPECT_GE(r.checked, 3 * r.skipped);
}

INSTANTIATE_TEST_SUITE_P(Configs, ModelGradient, ::testing::Range(0, 8));
