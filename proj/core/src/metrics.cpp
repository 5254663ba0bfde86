#include "mhaff/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "mhaff/detail/text_util.hpp"
#include "mhaff/error.hpp"
#include "mhaff/random.hpp"
#include "mhaff/screening.hpp"
#include "json.hpp"

namespace mhaff::eval {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double ratio(double num, double den) { return den > 0 ? num / den : kNaN; }

nlohmann::ordered_json number(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

}  // namespace

BinaryRates binary_rates(std::size_t tp, std::size_t fn, std::size_t tn, std::size_t fp) {
  BinaryRates r;
  const double total = static_cast<double>(tp + fn + tn + fp);
  r.acc = ratio(static_cast<double>(tp + tn), total);
  r.sen = ratio(static_cast<double>(tp), static_cast<double>(tp + fn));
  r.spe = ratio(static_cast<double>(tn), static_cast<double>(tn + fp));
  r.precision = ratio(static_cast<double>(tp), static_cast<double>(tp + fp));
  r.f1 = ratio(2.0 * static_cast<double>(tp), static_cast<double>(2 * tp + fp + fn));
  return r;
}

double accuracy(const Confusion& c) {
  double diag = 0, total = 0;
  for (std::size_t i = 0; i < c.size(); ++i)
    for (std::size_t j = 0; j < c[i].size(); ++j) {
      total += static_cast<double>(c[i][j]);
      if (i == j) diag += static_cast<double>(c[i][j]);
    }
  return ratio(diag, total);
}

double cohen_kappa(const Confusion& c) {
  // Integer form (N * diag - sum r_i c_i) / (N^2 - sum r_i c_i): one rounding only.
  const std::size_t m = c.size();
  std::vector<double> rows(m, 0), cols(m, 0);
  double total = 0, diag = 0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const double v = static_cast<double>(c[i][j]);
      total += v;
      rows[i] += v;
      cols[j] += v;
      if (i == j) diag += v;
    }
  if (total <= 0) return kNaN;
  double chance = 0;
  for (std::size_t i = 0; i < m; ++i) chance += rows[i] * cols[i];
  const double den = total * total - chance;
  if (den <= 0) return diag == total ? 1.0 : kNaN;
  return (total * diag - chance) / den;
}

std::pair<double, double> bootstrap_ci(std::span<const double> scores, std::span<const int> labels, std::size_t rounds,
                                       std::uint64_t seed) {
  if (scores.size() != labels.size()) throw Error(ErrorCode::kSizeMismatch, "scores and labels differ in length");
  // Raises SingleClassLabels for single-class input.
  screening::auc_rank(scores, labels);
  const std::size_t n = scores.size();
  Rng rng(seed);
  std::vector<double> aucs;
  aucs.reserve(rounds);
  std::vector<double> s(n);
  std::vector<int> l(n);
  for (std::size_t b = 0; b < rounds; ++b) {
    for (int attempt = 0; attempt < 10; ++attempt) {
      bool pos = false, neg = false;
      for (std::size_t i = 0; i < n; ++i) {
        const auto idx = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1));
        s[i] = scores[idx];
        l[i] = labels[idx];
        (l[i] == 1 ? pos : neg) = true;
      }
      if (pos && neg) {
        aucs.push_back(screening::auc_rank(s, l));
        break;
      }
    }
  }
  if (aucs.empty()) return {kNaN, kNaN};
  std::sort(aucs.begin(), aucs.end());
  const auto rank = [&](double q) {
    const auto r = static_cast<std::size_t>(std::ceil(q * static_cast<double>(aucs.size())));
    return aucs[std::clamp<std::size_t>(r, 1, aucs.size()) - 1];
  };
  return {rank(0.025), rank(0.975)};
}

MetricsReport compute_metrics(const std::vector<std::vector<double>>& probs, std::span<const int> labels,
                              std::size_t classes, std::uint64_t bootstrap_seed, std::size_t bootstrap_rounds) {
  if (probs.size() != labels.size()) throw Error(ErrorCode::kSizeMismatch, "predictions and labels differ in length");
  MetricsReport r;
  r.classes = classes;
  r.samples = labels.size();
  r.task = classes == 2 ? "binary" : "multiclass";
  r.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes || probs[i].size() != classes) {
      throw Error(ErrorCode::kLabelOutOfRange, "sample " + std::to_string(i));
    }
    std::size_t pred = 0;
    if (classes == 2) {
      pred = probs[i][1] >= 0.5 ? 1 : 0;
    } else {
      pred = static_cast<std::size_t>(std::max_element(probs[i].begin(), probs[i].end()) - probs[i].begin());
    }
    ++r.confusion[static_cast<std::size_t>(labels[i])][pred];
  }
  r.acc = accuracy(r.confusion);
  r.kappa = cohen_kappa(r.confusion);
  r.auc = r.sen = r.spe = r.f1 = r.auc_ci_lo = r.auc_ci_hi = kNaN;
  if (classes == 2) {
    const auto& c = r.confusion;
    const auto rates = binary_rates(c[1][1], c[1][0], c[0][0], c[0][1]);
    r.sen = rates.sen;
    r.spe = rates.spe;
    r.f1 = rates.f1;
    std::vector<double> p1;
    for (const auto& p : probs) p1.push_back(p[1]);
    try {
      r.auc = screening::auc_rank(p1, labels);
      std::tie(r.auc_ci_lo, r.auc_ci_hi) = bootstrap_ci(p1, labels, bootstrap_rounds, bootstrap_seed);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kSingleClassLabels) throw;
    }
  }
  return r;
}

std::string to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["task"] = r.task;
  j["classes"] = r.classes;
  j["samples"] = r.samples;
  j["acc"] = number(r.acc);
  if (r.task == "binary") {
    j["auc"] = number(r.auc);
    j["auc_ci95"] = {number(r.auc_ci_lo), number(r.auc_ci_hi)};
    j["sen"] = number(r.sen);
    j["spe"] = number(r.spe);
    j["f1"] = number(r.f1);
  }
  j["kappa"] = number(r.kappa);
  j["confusion"] = r.confusion;
  auto curve = nlohmann::ordered_json::array();
  for (const auto& e : r.curve) {
    curve.push_back({{"epoch", e.epoch},
                     {"lr", number(e.lr)},
                     {"train_loss", number(e.train_loss)},
                     {"val_loss", number(e.val_loss)},
                     {"val_acc", number(e.val_acc)}});
  }
  j["curve"] = curve;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.config) cfg[k] = v;
  j["config"] = cfg;
  return j.dump(2) + "\n";
}

std::string format_curve_csv(const std::vector<EpochRecord>& curve, const ConfigEcho& config) {
  std::ostringstream os;
  os << format_config_comments(config);
  os << "epoch,lr,train_loss,val_loss,val_acc\n";
  for (const auto& e : curve) {
    os << e.epoch << ',' << detail::format_double(e.lr) << ',' << detail::format_double(e.train_loss) << ','
       << detail::format_double(e.val_loss) << ',' << detail::format_double(e.val_acc) << '\n';
  }
  return os.str();
}

}  // namespace mhaff::eval
