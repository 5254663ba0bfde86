#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "gradcheck.hpp"
#include "op_cases.hpp"
#include "mhaff/nn/ops.hpp"
#include "mhaff/nn/optim.hpp"

using namespace mhaff;
using namespace mhaff::nn;
using mhaff::testing::check_gradients;
using mhaff::testing::random_array;

namespace {

std::vector<float> values(const Tensor<float>& t) { return {t.value().begin(), t.value().end()}; }

}  // namespace

TEST(Linear, IdentityWeightsReturnInput) {
  Graph<float> g;
  auto x = g.constant({2, 3}, {1, 2, 3, 4, 5, 6});
  auto w = g.constant({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  auto b = g.constant({3}, {0, 0, 0});
  EXPECT_EQ(values(linear(x, w, b)), (std::vector<float>{1, 2, 3, 4, 5, 6}));
}

TEST(Linear, HandDotProduct) {
  Graph<float> g;
  auto y = linear(g.constant({1, 2}, {1, 2}), g.constant({2, 1}, {1, 1}), g.constant({1}, {0.5f}));
  EXPECT_EQ(y.shape(), (Shape{1, 1}));
  EXPECT_FLOAT_EQ(y.value()[0], 3.5f);
}

TEST(Linear, InputWidthMismatchThrows) {
  Graph<float> g;
  try {
    linear(g.constant({1, 3}, {1, 2, 3}), g.constant({2, 1}, {1, 1}), g.constant({1}, {0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeMismatch);
  }
}

TEST(Conv2d, AllOnesCenterIsNine) {
  Graph<float> g;
  auto y = conv2d(g.constant({1, 3, 3}, std::vector<float>(9, 1)), g.constant({1, 1, 3, 3}, std::vector<float>(9, 1)));
  EXPECT_EQ(y.shape(), (Shape{1, 3, 3}));
  EXPECT_FLOAT_EQ(y.value()[4], 9);
  EXPECT_FLOAT_EQ(y.value()[0], 4);
  EXPECT_FLOAT_EQ(y.value()[1], 6);
}

TEST(Conv2d, ZeroKernelGivesZero) {
  Graph<float> g;
  Rng rng(1);
  std::vector<float> x(2 * 5 * 4);
  for (auto& v : x) v = static_cast<float>(rng.normal());
  auto y = conv2d(g.constant({2, 5, 4}, x), g.constant({3, 2, 3, 3}, std::vector<float>(54, 0)));
  for (float v : y.value()) EXPECT_EQ(v, 0);
}

TEST(Conv2d, DeltaKernelIsIdentity) {
  Graph<float> g;
  Rng rng(2);
  std::vector<float> x(6 * 5);
  for (auto& v : x) v = static_cast<float>(rng.normal());
  std::vector<float> k(9, 0);
  k[4] = 1;
  auto y = conv2d(g.constant({1, 6, 5}, x), g.constant({1, 1, 3, 3}, k));
  EXPECT_EQ(values(y), x);
}

TEST(Conv2d, MatchesDirectSumOracle) {
  Rng rng(3);
  const std::size_t n = 2, ci = 3, co = 2, h = 5, w = 6;
  std::vector<float> x(n * ci * h * w), k(co * ci * 9), b(co);
  for (auto& v : x) v = static_cast<float>(rng.uniform(-1, 1));
  for (auto& v : k) v = static_cast<float>(rng.uniform(-1, 1));
  for (auto& v : b) v = static_cast<float>(rng.uniform(-1, 1));
  Graph<float> g;
  auto y = conv2d(g.constant({n, ci, h, w}, x), g.constant({co, ci, 3, 3}, k), g.constant({co}, b));
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t o = 0; o < co; ++o)
      for (std::size_t yy = 0; yy < h; ++yy)
        for (std::size_t xx = 0; xx < w; ++xx) {
          double acc = b[o];
          for (std::size_t c = 0; c < ci; ++c)
            for (int dy = -1; dy <= 1; ++dy)
              for (int dx = -1; dx <= 1; ++dx) {
                const long sy = static_cast<long>(yy) + dy, sx = static_cast<long>(xx) + dx;
                if (sy < 0 || sx < 0 || sy >= static_cast<long>(h) || sx >= static_cast<long>(w)) continue;
                acc += k[((o * ci + c) * 3 + (dy + 1)) * 3 + (dx + 1)] * x[((s * ci + c) * h + sy) * w + sx];
              }
          EXPECT_NEAR(y.value()[((s * co + o) * h + yy) * w + xx], acc, 1e-5);
        }
}

TEST(Conv2d, NonSquareKernelRejected) {
  Graph<float> g;
  EXPECT_THROW(conv2d(g.constant({1, 4, 4}, std::vector<float>(16)), g.constant({1, 1, 2, 2}, std::vector<float>(4))), Error);
}

TEST(Pooling, ConstantInputStaysConstant) {
  Graph<float> g;
  auto x = g.constant({2, 4, 4}, std::vector<float>(32, 1.5f));
  for (float v : maxpool2(x).value()) EXPECT_EQ(v, 1.5f);
  auto gap = global_avg_pool(x);
  EXPECT_EQ(gap.shape(), (Shape{2}));
  for (float v : gap.value()) EXPECT_FLOAT_EQ(v, 1.5f);
}

TEST(Pooling, OddSpatialDimsRejected) {
  Graph<float> g;
  try {
    maxpool2(g.constant({1, 3, 4}, std::vector<float>(12)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kOddSpatialDims);
  }
}

TEST(Pooling, TieRoutesGradientToFirstElement) {
  Graph<double> g;
  auto x = g.parameter({1, 2, 2}, {2, 2, 2, 2});
  auto y = sum(maxpool2(x));
  g.backward(y);
  EXPECT_EQ(std::vector<double>(x.grad().begin(), x.grad().end()), (std::vector<double>{1, 0, 0, 0}));
}

TEST(Activations, ReluAndTanh) {
  Graph<float> g;
  EXPECT_EQ(values(relu(g.constant({2}, {-1, 2}))), (std::vector<float>{0, 2}));
  EXPECT_EQ(tanh_act(g.constant({1}, {0})).value()[0], 0);
}

TEST(LayerNorm, ConstantVectorGivesZeros) {
  Graph<float> g;
  auto y = layer_norm(g.constant({4}, {3, 3, 3, 3}), g.constant({4}, {1, 1, 1, 1}), g.constant({4}, {0, 0, 0, 0}));
  for (float v : y.value()) EXPECT_EQ(v, 0);
}

TEST(LayerNorm, PlusMinusOne) {
  Graph<double> g;
  auto y = layer_norm(g.constant({2}, {1, -1}), g.constant({2}, {1, 1}), g.constant({2}, {0, 0}));
  const double expected = 1.0 / std::sqrt(1.0 + 1e-5);
  EXPECT_NEAR(y.value()[0], expected, 1e-12);
  EXPECT_NEAR(y.value()[1], -expected, 1e-12);
  EXPECT_LE(std::abs(y.value()[0] - 1.0), 1e-5);
}

TEST(LayerNorm, ConstantInputReturnsBias) {
  Graph<float> g;
  auto y = layer_norm(g.constant({3}, {7, 7, 7}), g.constant({3}, {2, 3, 4}), g.constant({3}, {0.5f, -1, 2}));
  EXPECT_EQ(values(y), (std::vector<float>{0.5f, -1, 2}));
}

TEST(LayerNorm, NormalizedMomentsProperty) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 2 + static_cast<std::size_t>(rng.uniform_int(0, 60));
    std::vector<float> x(d);
    for (auto& v : x) v = static_cast<float>(rng.uniform(-5, 5));
    Graph<float> g;
    auto y = layer_norm(g.constant({d}, x), g.constant({d}, std::vector<float>(d, 1)), g.constant({d}, std::vector<float>(d, 0)));
    double mean = 0, var = 0;
    for (float v : y.value()) mean += v;
    mean /= d;
    for (float v : y.value()) var += (v - mean) * (v - mean);
    var /= d;
    EXPECT_NEAR(mean, 0, 1e-4);
    EXPECT_NEAR(var, 1, 1e-4);
  }
}

TEST(Softmax, UniformForZeros) {
  Graph<float> g;
  for (float v : softmax(g.constant({4}, {0, 0, 0, 0})).value()) EXPECT_FLOAT_EQ(v, 0.25f);
}

TEST(Softmax, LogThreeVersusZero) {
  Graph<double> g;
  auto p = softmax(g.constant({2}, {std::log(3.0), 0}));
  EXPECT_NEAR(p.value()[0], 0.75, 1e-15);
  EXPECT_NEAR(p.value()[1], 0.25, 1e-15);
}

TEST(Softmax, SumsToOneAndShiftInvariant) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t t = 1 + static_cast<std::size_t>(rng.uniform_int(0, 20));
    std::vector<float> x(t), shifted(t);
    const float c = static_cast<float>(rng.uniform(-10, 10));
    for (std::size_t i = 0; i < t; ++i) {
      x[i] = static_cast<float>(rng.uniform(-8, 8));
      shifted[i] = x[i] + c;
    }
    Graph<float> g;
    auto a = softmax(g.constant({t}, x));
    auto b = softmax(g.constant({t}, shifted));
    double total = 0;
    for (std::size_t i = 0; i < t; ++i) {
      total += a.value()[i];
      EXPECT_NEAR(a.value()[i], b.value()[i], 1e-6);
    }
    EXPECT_NEAR(total, 1.0, 1e-6);
  }
}

TEST(CrossEntropy, UniformThreeClassIsLogThree) {
  for (std::size_t target = 0; target < 3; ++target) {
    Graph<double> g;
    EXPECT_NEAR(cross_entropy(g.constant({3}, {0.2, 0.2, 0.2}), target).item(), std::log(3.0), 1e-12);
  }
}

TEST(CrossEntropy, ClassOutOfRange) {
  Graph<float> g;
  EXPECT_THROW(cross_entropy(g.constant({2}, {0, 0}), 2), Error);
}

TEST(Backward, SumGivesOnes) {
  Graph<double> g;
  auto x = g.parameter({2, 3, 2}, std::vector<double>(12, 0.3));
  g.backward(sum(x));
  for (double v : x.grad()) EXPECT_EQ(v, 1.0);
}

TEST(Backward, ProductRule) {
  Graph<double> g;
  auto x = g.parameter({}, {2});
  auto y = g.parameter({}, {3});
  g.backward(mul(x, y));
  EXPECT_EQ(x.grad()[0], 3);
  EXPECT_EQ(y.grad()[0], 2);
}

TEST(Backward, FanOutAccumulates) {
  Graph<double> g;
  auto x = g.parameter({}, {1.5});
  g.backward(add(mul(x, x), x));
  EXPECT_DOUBLE_EQ(x.grad()[0], 4.0);
}

TEST(Backward, NonScalarLossRejected) {
  Graph<double> g;
  auto x = g.parameter({2}, {1, 2});
  try {
    g.backward(x);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonScalarLoss);
  }
}

TEST(Backward, DeterministicAcrossRuns) {
  auto run = [] {
    Rng rng(9);
    std::vector<float> x(2 * 8 * 8), k(4 * 2 * 9);
    for (auto& v : x) v = static_cast<float>(rng.normal());
    for (auto& v : k) v = static_cast<float>(rng.normal());
    Graph<float> g;
    auto kt = g.parameter({4, 2, 3, 3}, k);
    auto loss = cross_entropy(reshape(global_avg_pool(relu(conv2d(g.constant({2, 8, 8}, x), kt))), {4}), 1);
    g.backward(loss);
    return std::pair{loss.item(), std::vector<float>(kt.grad().begin(), kt.grad().end())};
  };
  EXPECT_EQ(run(), run());
}

class OpGradient : public ::testing::TestWithParam<int> {};

TEST_P(OpGradient, MatchesFiniteDifferences) {
  Rng rng(100 + GetParam());
  for (auto& c : mhaff::testing::op_cases(rng)) {
    const auto r = check_gradients(c.build, c.inputs, rng);
    EXPECT_LT(r.max_rel_error, 1e-5) << c.name;
    EXPECT_GT(r.checked, 0u) << c.name;
  }
}

INSTANTIATE_TEST_SUITE_P(RandomShapes, OpGradient, ::testing::Range(0, 5));

TEST(Cosine, Endpoints) {
  EXPECT_DOUBLE_EQ(cosine_lr(0, 50, 0.01), 0.01);
  EXPECT_NEAR(cosine_lr(50, 50, 0.01), 0.0, 1e-18);
  EXPECT_NEAR(cosine_lr(25, 50, 0.01), 0.005, 1e-15);
}

TEST(Adam, FirstStepIsSignTimesLr) {
  ParamMap<double> p{{"w", Array<double>({4}, {1, -2, 3, 0.5})}};
  GradMap<double> g{{"w", {0.5, -0.001, 3.0, -20.0}}};
  AdamState<double> state;
  AdamConfig cfg;
  cfg.weight_decay = 0;
  const double lr = 0.01;
  const auto before = p.at("w").data;
  adam_step(p, g, state, cfg, lr);
  for (std::size_t i = 0; i < 4; ++i) {
    const double step = p.at("w").data[i] - before[i];
    const double gi = g.at("w")[i];
    const double expected = -lr * (gi > 0 ? 1 : -1);
    // The only deviation from -lr*sign(g) is the epsilon term: lr * eps / (|g| + eps).
    EXPECT_LE(std::abs(step - expected), lr * cfg.eps / std::abs(gi) * 1.01 + 1e-15) << i;
    if (std::abs(gi) >= 1e-2) EXPECT_LE(std::abs(step - expected), 1e-6 * lr) << i;
  }
  EXPECT_EQ(state.step, 1);
}

TEST(Adam, DecoupledDecayWithZeroGradient) {
  ParamMap<double> p{{"w", Array<double>({1}, {2.0})}};
  AdamState<double> state;
  AdamConfig cfg;
  cfg.weight_decay = 0.1;
  adam_step(p, GradMap<double>{{"w", {0.0}}}, state, cfg, 0.5);
  EXPECT_DOUBLE_EQ(p.at("w").data[0], 2.0 - 0.5 * 0.1 * 2.0);
}

TEST(Adam, StateShapeMismatch) {
  ParamMap<float> p{{"w", Array<float>({2}, {1, 2})}};
  AdamState<float> state;
  state.m["w"] = {0, 0, 0};
  EXPECT_THROW(adam_step(p, GradMap<float>{{"w", {1, 1}}}, state, AdamConfig{}, 0.1), Error);
}

TEST(Adam, ZeroLearningRateLeavesParameters) {
  ParamMap<float> p{{"w", Array<float>({2}, {1, 2})}};
  AdamState<float> state;
  adam_step(p, GradMap<float>{{"w", {1, -1}}}, state, AdamConfig{}, 0.0);
  EXPECT_EQ(p.at("w").data, (std::vector<float>{1, 2}));
}
