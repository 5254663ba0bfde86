#include "mhaff/ablation.hpp"

#include <cmath>
#include <sstream>

#include "json.hpp"
#include "mhaff/detail/text_util.hpp"
#include "mhaff/random.hpp"

namespace mhaff::ablation {

namespace {

double mean_radiomics_weight(const explain::AttentionSummary& a) {
  if (a.heads == 0) return std::nan("");
  double total = 0, n = 0;
  for (std::size_t c = 0; c < a.classes; ++c)
    if (a.counts[c] > 0) {
      total += a.radiomics[a.heads][c] * static_cast<double>(a.counts[c]);
      n += static_cast<double>(a.counts[c]);
    }
  return n > 0 ? total / n : std::nan("");
}

std::string fmt(double v) { return std::isfinite(v) ? detail::format_double(v) : "NA"; }

}  // namespace

std::vector<Variant> make_grid(const std::vector<std::size_t>& hs, const std::vector<std::size_t>& ks,
                               const std::vector<std::size_t>& ns, const std::vector<bool>& sis,
                               const std::vector<model::Fusion>& fusions) {
  std::vector<Variant> out;
  for (auto h : hs)
    for (auto k : ks)
      for (auto n : ns)
        for (bool s : sis)
          for (auto f : fusions) {
            Variant v{"", h, k, n, s, f};
            v.name = model::to_string(f) + "_h" + std::to_string(h) + "_k" + std::to_string(k) + "_n" + std::to_string(n) +
                     (s ? "_sis" : "_all");
            out.push_back(v);
          }
  return out;
}

std::vector<Variant> standard_grid(std::size_t k, std::size_t n) {
  std::vector<Variant> out;
  for (std::size_t h : {1, 2, 4, 8}) out.push_back({"mhaff_x" + std::to_string(h), h, k, n, true, model::Fusion::kAttention});
  out.push_back({"sis_off", 4, k, n, false, model::Fusion::kAttention});
  out.push_back({"attention_off", 4, k, n, true, model::Fusion::kUniform});
  out.push_back({"simpleff", 4, k, n, true, model::Fusion::kConcat});
  out.push_back({"radiomics_lr", 4, k, n, true, model::Fusion::kRadiomicsOnly});
  return out;
}

std::vector<Row> run_ablation(const std::vector<Variant>& grid, const DataProvider& data, const train::TrainConfig& base) {
  std::vector<Row> rows;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Variant& v = grid[i];
    const Splits splits = data(v);
    if (splits.train.empty()) throw Error(ErrorCode::kEmptySplit, "ablation row " + v.name + " has no training data");
    train::TrainConfig tc = base;
    tc.seed = hash_seed({base.seed, i});
    tc.model.h = v.h;
    tc.model.k = v.k;
    tc.model.n = v.n;
    tc.model.fusion = v.fusion;
    tc.model.seed = tc.seed;
    tc.model.radiomics_dim = splits.train.front().radiomics.size();
    const auto result = train::train(splits.train, splits.val, tc);
    const auto preds = train::predict_all(tc.model, result.params, result.standardizer, splits.test);
    Row row;
    row.variant = v;
    row.seed = tc.seed;
    row.radiomics_dim = tc.model.radiomics_dim;
    const auto labels = train::labels(splits.test);
    row.report = eval::compute_metrics(train::probabilities(preds), labels, tc.model.m, hash_seed({tc.seed, 3}));
    row.report.curve = result.curve;
    if (v.fusion == model::Fusion::kAttention || v.fusion == model::Fusion::kUniform) {
      row.attention = explain::export_attention(preds, labels, v.h, tc.model.m);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_table_csv(const std::vector<Row>& rows, const ConfigEcho& config) {
  std::ostringstream os;
  os << format_config_comments(config);
  os << "name,h,k,n,sis,fusion,radiomics_dim,acc,auc,sen,spe,f1,kappa,mean_radiomics_weight\n";
  for (const auto& r : rows) {
    const auto& v = r.variant;
    const auto& m = r.report;
    os << v.name << ',' << v.h << ',' << v.k << ',' << v.n << ',' << (v.sis ? "on" : "off") << ',' << model::to_string(v.fusion)
       << ',' << r.radiomics_dim << ',' << fmt(m.acc) << ',' << fmt(m.auc) << ',' << fmt(m.sen) << ',' << fmt(m.spe) << ','
       << fmt(m.f1) << ',' << fmt(m.kappa) << ',' << fmt(mean_radiomics_weight(r.attention)) << '\n';
  }
  return os.str();
}

std::string format_rows_json(const std::vector<Row>& rows, const ConfigEcho& config) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["name"] = r.variant.name;
    j["h"] = r.variant.h;
    j["k"] = r.variant.k;
    j["n"] = r.variant.n;
    j["sis"] = r.variant.sis;
    j["fusion"] = model::to_string(r.variant.fusion);
    j["seed"] = std::to_string(r.seed);
    j["radiomics_dim"] = r.radiomics_dim;
    j["report"] = nlohmann::ordered_json::parse(eval::to_json(r.report));
    arr.push_back(j);
  }
  nlohmann::ordered_json root;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : config) cfg[k] = v;
  root["config"] = cfg;
  root["rows"] = arr;
  return root.dump(2) + "\n";
}

}  // namespace mhaff::ablation
