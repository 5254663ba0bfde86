#pragma once

#include <span>
#include <string>
#include <vector>

#include "mhaff/feature_table.hpp"

namespace mhaff::screening {

struct LogisticFit {
  double intercept = 0.0;
  double slope = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Newton-Raphson on the two-parameter log-likelihood. `values` are used as
// given (callers z-score them). At most 100 iterations, gradient-norm
// tolerance 1e-8; on separation the last finite iterate is kept.
LogisticFit fit_univariate_logistic(std::span<const double> values, std::span<const int> labels);

// Mann-Whitney AUC: (wins + ties / 2) / (n_pos * n_neg). Labels are 0/1.
double auc_rank(std::span<const double> scores, std::span<const int> labels);

struct ZScore {
  double mean = 0.0;
  double sd = 0.0;  // population; 0 maps every value to 0
  double apply(double v) const { return sd > 0.0 ? (v - mean) / sd : 0.0; }
};
ZScore fit_zscore(std::span<const double> values);

// Out-of-sample AUC of one feature: fit on train, score validation. For more
// than two classes, the macro average of one-vs-rest AUCs.
double out_of_sample_auc(std::span<const double> train_values, std::span<const int> train_labels,
                         std::span<const double> val_values, std::span<const int> val_labels, int classes);

struct FeatureScore {
  std::string feature;
  std::string category;
  double auc = 0.0;
  bool selected = false;
};

struct CategorySelection {
  std::string category;
  double threshold = 0.0;  // k-th largest AUC within the category
  std::vector<std::string> selected;
};

struct ScreeningReport {
  int k = 0;
  std::vector<FeatureScore> scores;  // usable features only, table column order
  std::vector<std::string> excluded;  // columns dropped for sentinel values
  std::vector<CategorySelection> categories;
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;

  // Selected columns, category order then rank order.
  std::vector<std::string> selected_columns() const;
};

// Columns with any sentinel in the train or validation rows are excluded.
// Within each category features are ranked by AUC descending, ties by name
// ascending; the top min(k, size) are kept. Throws CategoryStarved when a
// category present in `categories` has no usable feature.
ScreeningReport sis_select(const FeatureTable& table, const std::vector<std::string>& train_ids,
                           const std::vector<std::string>& val_ids, int k, int classes,
                           std::span<const std::string_view> categories);
ScreeningReport sis_select(const FeatureTable& table, const std::vector<std::string>& train_ids,
                           const std::vector<std::string>& val_ids, int k, int classes);

// `feature,category,auc,selected` rows.
std::string format_report_csv(const ScreeningReport& report, const ConfigEcho& config = {});
std::string format_selected_list(const ScreeningReport& report);
std::vector<std::string> parse_selected_list(std::string_view text);

}  // namespace mhaff::screening
