#pragma once

#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "mhaff/nn/tensor.hpp"

namespace mhaff::nn {

template <typename T>
using ParamMap = std::map<std::string, Array<T>>;
template <typename T>
using GradMap = std::map<std::string, std::vector<T>>;

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-5;
};

template <typename T>
struct AdamState {
  std::map<std::string, std::vector<T>> m;
  std::map<std::string, std::vector<T>> v;
  long step = 0;
};

// lr(t) = 0.5 * lr_max * (1 + cos(pi * t / T))
inline double cosine_lr(double t, double total, double lr_max) {
  if (total <= 0) return lr_max;
  return 0.5 * lr_max * (1.0 + std::cos(std::numbers::pi * t / total));
}

// Decoupled weight decay followed by a bias-corrected Adam update. Parameters
// without a gradient entry are left untouched (but still decayed).
template <typename T>
void adam_step(ParamMap<T>& params, const GradMap<T>& grads, AdamState<T>& state, const AdamConfig& cfg, double lr) {
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (auto& [name, p] : params) {
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.empty()) m.assign(p.size(), T(0));
    if (v.empty()) v.assign(p.size(), T(0));
    if (m.size() != p.size() || v.size() != p.size()) {
      throw Error(ErrorCode::kShapeMismatch, "optimizer state for " + name + " does not match parameter");
    }
    const auto it = grads.find(name);
    if (it != grads.end() && it->second.size() != p.size()) {
      throw Error(ErrorCode::kShapeMismatch, "gradient for " + name + " does not match parameter");
    }
    const T decay = static_cast<T>(lr * cfg.weight_decay);
    for (std::size_t i = 0; i < p.size(); ++i) {
      p.data[i] -= decay * p.data[i];
      if (it == grads.end()) continue;
      const T g = it->second[i];
      m[i] = static_cast<T>(cfg.beta1) * m[i] + static_cast<T>(1 - cfg.beta1) * g;
      v[i] = static_cast<T>(cfg.beta2) * v[i] + static_cast<T>(1 - cfg.beta2) * g * g;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p.data[i] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + cfg.eps));
    }
  }
}

}  // namespace mhaff::nn
