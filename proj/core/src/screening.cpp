#include "mhaff/screening.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "mhaff/detail/text_util.hpp"
#include "mhaff/error.hpp"
#include "mhaff/radiomics.hpp"

namespace mhaff::screening {

namespace {

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

void require_both_classes(std::span<const int> labels) {
  bool pos = false, neg = false;
  for (int y : labels) {
    if (y == 1) pos = true;
    else if (y == 0) neg = true;
    else throw Error(ErrorCode::kLabelOutOfRange, "binary labels must be 0 or 1");
  }
  if (!pos || !neg) throw Error(ErrorCode::kSingleClassLabels, "labels contain a single class");
}

}  // namespace

LogisticFit fit_univariate_logistic(std::span<const double> x, std::span<const int> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::kShapeMismatch, "values and labels differ in length");
  require_both_classes(y);
  const auto n = static_cast<double>(x.size());
  const double base = std::accumulate(y.begin(), y.end(), 0.0) / n;

  LogisticFit fit;
  fit.intercept = std::log(base / (1.0 - base));
  for (int it = 0; it < 100; ++it) {
    double g0 = 0.0, g1 = 0.0, h00 = 0.0, h01 = 0.0, h11 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double p = sigmoid(fit.intercept + fit.slope * x[i]);
      const double r = y[i] - p;
      const double w = p * (1.0 - p);
      g0 += r;
      g1 += r * x[i];
      h00 += w;
      h01 += w * x[i];
      h11 += w * x[i] * x[i];
    }
    if (std::hypot(g0, g1) < 1e-8) {
      fit.converged = true;
      break;
    }
    const double det = h00 * h11 - h01 * h01;
    double step0 = 0.0, step1 = 0.0;
    if (det > 1e-300 && h00 > 0.0) {
      step0 = (h11 * g0 - h01 * g1) / det;
      step1 = (h00 * g1 - h01 * g0) / det;
    } else if (h00 > 0.0 && h11 == 0.0) {
      // Feature carries no variation: only the intercept can move.
      step0 = g0 / h00;
    } else {
      break;
    }
    const double b0 = fit.intercept + step0;
    const double b1 = fit.slope + step1;
    if (!std::isfinite(b0) || !std::isfinite(b1)) break;
    fit.intercept = b0;
    fit.slope = b1;
    fit.iterations = it + 1;
  }
  return fit;
}

double auc_rank(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error(ErrorCode::kShapeMismatch, "scores and labels differ in length");
  require_both_classes(labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Twice the positive rank sum, using midranks for ties (integers throughout).
  double rank_sum_x2 = 0.0;
  double n_pos = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank_x2 = static_cast<double>(i + 1 + j);  // (i+1) + j = 2 * mean 1-based rank
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] == 1) {
        rank_sum_x2 += midrank_x2;
        n_pos += 1.0;
      }
    }
    i = j;
  }
  const double n_neg = static_cast<double>(scores.size()) - n_pos;
  // 2U = 2R - n_pos (n_pos + 1); AUC = U / (n_pos n_neg)
  const double u_x2 = rank_sum_x2 - n_pos * (n_pos + 1.0);
  return u_x2 / (2.0 * n_pos * n_neg);
}

ZScore fit_zscore(std::span<const double> values) {
  ZScore z;
  if (values.empty()) return z;
  const auto n = static_cast<double>(values.size());
  z.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - z.mean) * (v - z.mean);
  z.sd = std::sqrt(ss / n);
  return z;
}

namespace {

double binary_oos_auc(std::span<const double> train, std::span<const int> train_y, std::span<const double> val,
                      std::span<const int> val_y) {
  const ZScore z = fit_zscore(train);
  std::vector<double> zt(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) zt[i] = z.apply(train[i]);
  const LogisticFit fit = fit_univariate_logistic(zt, train_y);
  std::vector<double> eta(val.size());
  for (std::size_t i = 0; i < val.size(); ++i) eta[i] = fit.intercept + fit.slope * z.apply(val[i]);
  return auc_rank(eta, val_y);
}

}  // namespace

double out_of_sample_auc(std::span<const double> train_values, std::span<const int> train_labels,
                         std::span<const double> val_values, std::span<const int> val_labels, int classes) {
  if (classes <= 2) return binary_oos_auc(train_values, train_labels, val_values, val_labels);
  double sum = 0.0;
  std::vector<int> ty(train_labels.size()), vy(val_labels.size());
  for (int c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < ty.size(); ++i) ty[i] = train_labels[i] == c;
    for (std::size_t i = 0; i < vy.size(); ++i) vy[i] = val_labels[i] == c;
    sum += binary_oos_auc(train_values, ty, val_values, vy);
  }
  return sum / classes;
}

std::vector<std::string> ScreeningReport::selected_columns() const {
  std::vector<std::string> out;
  for (const auto& c : categories) out.insert(out.end(), c.selected.begin(), c.selected.end());
  return out;
}

ScreeningReport sis_select(const FeatureTable& table, const std::vector<std::string>& train_ids,
                           const std::vector<std::string>& val_ids, int k, int classes) {
  std::vector<std::string_view> cats(radiomics::kCategories.begin(), radiomics::kCategories.end());
  return sis_select(table, train_ids, val_ids, k, classes, cats);
}

ScreeningReport sis_select(const FeatureTable& table, const std::vector<std::string>& train_ids,
                           const std::vector<std::string>& val_ids, int k, int classes,
                           std::span<const std::string_view> categories) {
  if (k < 1) throw Error(ErrorCode::kInvalidValue, "k must be >= 1");
  if (train_ids.empty()) throw Error(ErrorCode::kEmptySplit, "training split is empty");
  if (val_ids.empty()) throw Error(ErrorCode::kEmptySplit, "validation split is empty");

  auto rows_for = [&](const std::vector<std::string>& ids) {
    std::vector<std::size_t> rows;
    for (const auto& id : ids) {
      const auto r = table.row_index(id);
      if (!r) throw Error(ErrorCode::kMissingKey, "feature table has no row for " + id);
      rows.push_back(*r);
    }
    return rows;
  };
  const auto train_rows = rows_for(train_ids);
  const auto val_rows = rows_for(val_ids);
  std::vector<int> train_y, val_y;
  for (auto r : train_rows) train_y.push_back(table.labels[r]);
  for (auto r : val_rows) val_y.push_back(table.labels[r]);
  for (int y : train_y)
    if (y < 0 || y >= std::max(classes, 2)) throw Error(ErrorCode::kLabelOutOfRange, "label " + std::to_string(y));
  for (int y : val_y)
    if (y < 0 || y >= std::max(classes, 2)) throw Error(ErrorCode::kLabelOutOfRange, "label " + std::to_string(y));

  ScreeningReport report;
  report.k = k;
  report.train_ids = train_ids;
  report.val_ids = val_ids;

  std::vector<double> tv(train_rows.size()), vv(val_rows.size());
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    const std::string category = radiomics::category_of(table.columns[c]);
    if (std::find(categories.begin(), categories.end(), category) == categories.end()) continue;
    bool usable = true;
    for (std::size_t i = 0; i < train_rows.size() && usable; ++i) {
      tv[i] = table.rows[train_rows[i]][c];
      usable = !is_sentinel(tv[i]);
    }
    for (std::size_t i = 0; i < val_rows.size() && usable; ++i) {
      vv[i] = table.rows[val_rows[i]][c];
      usable = !is_sentinel(vv[i]);
    }
    if (!usable) {
      report.excluded.push_back(table.columns[c]);
      continue;
    }
    report.scores.push_back({table.columns[c], category, out_of_sample_auc(tv, train_y, vv, val_y, classes), false});
  }

  for (auto category : categories) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < report.scores.size(); ++i)
      if (report.scores[i].category == category) members.push_back(i);
    if (members.empty()) {
      throw Error(ErrorCode::kCategoryStarved, "no usable feature in category " + std::string(category));
    }
    std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      const auto& fa = report.scores[a];
      const auto& fb = report.scores[b];
      if (fa.auc != fb.auc) return fa.auc > fb.auc;
      return fa.feature < fb.feature;
    });
    const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(k), members.size());
    CategorySelection sel;
    sel.category = std::string(category);
    sel.threshold = report.scores[members[keep - 1]].auc;
    for (std::size_t r = 0; r < keep; ++r) {
      report.scores[members[r]].selected = true;
      sel.selected.push_back(report.scores[members[r]].feature);
    }
    report.categories.push_back(std::move(sel));
  }
  return report;
}

std::string format_report_csv(const ScreeningReport& report, const ConfigEcho& config) {
  std::ostringstream os;
  os << format_config_comments(config);
  os << "feature,category,auc,selected\n";
  for (const auto& s : report.scores) {
    os << s.feature << ',' << s.category << ',' << detail::format_double(s.auc) << ',' << (s.selected ? 1 : 0) << '\n';
  }
  return os.str();
}

std::string format_selected_list(const ScreeningReport& report) {
  std::ostringstream os;
  for (const auto& c : report.selected_columns()) os << c << '\n';
  return os.str();
}

std::vector<std::string> parse_selected_list(std::string_view text) {
  std::vector<std::string> out;
  for (const auto line : detail::split_lines(text)) {
    const auto t = detail::trim(line);
    if (!t.empty() && t.front() != '#') out.emplace_back(t);
  }
  return out;
}

}  // namespace mhaff::screening
