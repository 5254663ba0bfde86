#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mhaff/feature_table.hpp"

namespace mhaff::eval {

// Undefined rates (zero denominators) and inapplicable metrics are NaN,
// serialized as null.
struct BinaryRates {
  double acc = 0, sen = 0, spe = 0, precision = 0, f1 = 0;
};
BinaryRates binary_rates(std::size_t tp, std::size_t fn, std::size_t tn, std::size_t fp);

// confusion[true][predicted]
using Confusion = std::vector<std::vector<std::size_t>>;
double accuracy(const Confusion& c);
double cohen_kappa(const Confusion& c);

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0;
  double train_loss = 0;
  double val_loss = 0;
  double val_acc = 0;
};

struct MetricsReport {
  std::string task;  // "binary" or "multiclass"
  std::size_t classes = 0;
  std::size_t samples = 0;
  double acc = 0;
  double auc = 0;
  double sen = 0;
  double spe = 0;
  double f1 = 0;
  double kappa = 0;
  double auc_ci_lo = 0;
  double auc_ci_hi = 0;
  Confusion confusion;
  std::vector<EpochRecord> curve;
  ConfigEcho config;
};

// Binary: class 1 predicted when p1 >= 0.5; AUC of p1 with a bootstrap CI.
// Multiclass: argmax (first on ties), accuracy and kappa only.
MetricsReport compute_metrics(const std::vector<std::vector<double>>& probs, std::span<const int> labels,
                              std::size_t classes, std::uint64_t bootstrap_seed, std::size_t bootstrap_rounds = 2000);

// Percentile bootstrap CI (2.5 / 97.5, nearest rank) of the AUC. Single-class
// resamples are redrawn up to 10 times, then skipped.
std::pair<double, double> bootstrap_ci(std::span<const double> scores, std::span<const int> labels,
                                       std::size_t rounds, std::uint64_t seed);

std::string to_json(const MetricsReport& report);
std::string format_curve_csv(const std::vector<EpochRecord>& curve, const ConfigEcho& config = {});

}  // namespace mhaff::eval
