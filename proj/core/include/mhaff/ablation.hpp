#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mhaff/explain.hpp"
#include "mhaff/metrics.hpp"
#include "mhaff/train.hpp"

namespace mhaff::ablation {

struct Variant {
  std::string name;
  std::size_t h = 4;
  std::size_t k = 10;
  std::size_t n = 7;
  bool sis = true;
  model::Fusion fusion = model::Fusion::kAttention;
};

struct Splits {
  train::Dataset train;
  train::Dataset val;
  train::Dataset test;
};

// Supplies the data for a variant (k, n and sis change the inputs).
using DataProvider = std::function<Splits(const Variant&)>;

struct Row {
  Variant variant;
  std::uint64_t seed = 0;
  std::size_t radiomics_dim = 0;
  eval::MetricsReport report;
  explain::AttentionSummary attention;  // empty for concat / radiomics-only rows
};

// Cartesian product in the order h, k, n, sis, fusion.
std::vector<Variant> make_grid(const std::vector<std::size_t>& hs, const std::vector<std::size_t>& ks,
                               const std::vector<std::size_t>& ns, const std::vector<bool>& sis,
                               const std::vector<model::Fusion>& fusions);

// MHA-FF x{1,2,4,8}, SIS-off, attention-off, SimpleFF and radiomics-only rows.
std::vector<Variant> standard_grid(std::size_t k, std::size_t n);

// Row seeds are hash(base.seed, row index).
std::vector<Row> run_ablation(const std::vector<Variant>& grid, const DataProvider& data, const train::TrainConfig& base);

// One row per variant: name,h,k,n,sis,fusion,radiomics_dim,acc,auc,sen,spe,f1,kappa,mean_radiomics_weight
std::string format_table_csv(const std::vector<Row>& rows, const ConfigEcho& config = {});
std::string format_rows_json(const std::vector<Row>& rows, const ConfigEcho& config = {});

}  // namespace mhaff::ablation
