#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "mhaff/error.hpp"
#include "mhaff/random.hpp"
#include "mhaff/screening.hpp"
#include "screening_oracle.hpp"

using namespace mhaff;
using namespace mhaff::screening;
namespace oracle = mhaff::testing;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kIo;
}

void expect_matches_oracle(const oracle::RandomTable& rt, int k, int classes) {
  const auto report = sis_select(rt.table, rt.train, rt.val, k, classes);
  const auto want = oracle::oracle_select(rt.table, rt.train, rt.val, k, classes);
  ASSERT_EQ(report.scores.size(), want.auc.size());
  for (const auto& s : report.scores) EXPECT_NEAR(s.auc, want.auc.at(s.feature), 1e-12) << s.feature;
  for (const auto& c : report.categories) {
    const auto it = want.selected.find(c.category);
    ASSERT_NE(it, want.selected.end());
    EXPECT_EQ(c.selected, it->second) << c.category;
  }
}

}  // namespace

TEST(Logistic, ConstantFeatureGivesBaseRate) {
  const std::vector<double> x(8, 0.0);
  const std::vector<int> y{1, 0, 0, 1, 0, 0, 0, 1};
  const auto fit = fit_univariate_logistic(x, y);
  EXPECT_EQ(fit.slope, 0.0);
  EXPECT_NEAR(fit.intercept, std::log(3.0 / 5.0), 1e-10);
}

TEST(Logistic, PositiveAssociation) {
  const std::vector<double> x{-1, -1, 1, 1};
  const std::vector<int> y{0, 0, 1, 1};
  const auto fit = fit_univariate_logistic(x, y);
  EXPECT_GT(fit.slope, 0.0);
  EXPECT_TRUE(std::isfinite(fit.slope));
}

TEST(Logistic, NegativeAssociationOverlapping) {
  const std::vector<double> x{-1.2, -0.3, 0.4, 0.1, 1.0, 1.5, -0.8, 0.9};
  const std::vector<int> y{1, 1, 0, 1, 0, 0, 1, 1};
  const auto fit = fit_univariate_logistic(x, y);
  EXPECT_TRUE(fit.converged);
  EXPECT_LT(fit.slope, 0.0);
  // score equations hold at the optimum
  double g0 = 0, g1 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double p = 1.0 / (1.0 + std::exp(-(fit.intercept + fit.slope * x[i])));
    g0 += y[i] - p;
    g1 += (y[i] - p) * x[i];
  }
  EXPECT_NEAR(g0, 0.0, 1e-8);
  EXPECT_NEAR(g1, 0.0, 1e-8);
}

TEST(Logistic, SingleClassRejected) {
  EXPECT_EQ(code_of([] { fit_univariate_logistic(std::vector<double>{1, 2, 3}, std::vector<int>{1, 1, 1}); }),
            ErrorCode::kSingleClassLabels);
}

TEST(AucRank, HandExample) {
  EXPECT_DOUBLE_EQ(auc_rank(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<int>{0, 0, 1, 1}), 0.75);
}

TEST(AucRank, SeparatedAndTied) {
  EXPECT_EQ(auc_rank(std::vector<double>{0, 1, 2, 3}, std::vector<int>{0, 0, 1, 1}), 1.0);
  EXPECT_EQ(auc_rank(std::vector<double>{5, 5, 5, 5}, std::vector<int>{0, 1, 0, 1}), 0.5);
}

TEST(AucRank, SingleClassRejected) {
  EXPECT_EQ(code_of([] { auc_rank(std::vector<double>{1, 2}, std::vector<int>{0, 0}); }), ErrorCode::kSingleClassLabels);
}

TEST(AucRank, MatchesPairCountingWithTies) {
  Rng rng(99);
  for (int t = 0; t < 200; ++t) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(2, 60));
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.uniform_int(0, 6));
      y[i] = static_cast<int>(rng.uniform_int(0, 1));
    }
    y[0] = 0;
    y[1] = 1;
    EXPECT_EQ(auc_rank(s, y), oracle::pair_count_auc(s, y));
  }
}

TEST(AucRank, MonotoneTransformInvariant) {
  Rng rng(7);
  std::vector<double> s(50);
  std::vector<int> y(50);
  for (std::size_t i = 0; i < 50; ++i) {
    s[i] = rng.normal();
    y[i] = static_cast<int>(i % 2);
  }
  const double base = auc_rank(s, y);
  std::vector<double> t;
  for (double v : s) t.push_back(std::exp(3.0 * v) + 2.0);
  EXPECT_EQ(auc_rank(t, y), base);
}

TEST(Sis, MatchesOracleBinary) {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) expect_matches_oracle(oracle::random_screening_table(seed, 2), 3, 2);
}

TEST(Sis, MatchesOracleThreeClass) {
  for (std::uint64_t seed = 11; seed <= 14; ++seed) expect_matches_oracle(oracle::random_screening_table(seed, 3), 4, 3);
}

TEST(Sis, PlantedFeaturesRecovered) {
  const auto rt = oracle::planted_table(5);
  const std::vector<std::string_view> cats{"glcm"};
  const auto report = sis_select(rt.table, rt.train, rt.val, 5, 2, cats);
  auto selected = report.selected_columns();
  std::sort(selected.begin(), selected.end());
  EXPECT_EQ(selected, (std::vector<std::string>{"lung_glcm_planted0", "lung_glcm_planted1", "lung_glcm_planted2",
                                                "lung_glcm_planted3", "lung_glcm_planted4"}));
}

TEST(Sis, KEqualsCategorySizeKeepsAll) {
  const auto rt = oracle::random_screening_table(3, 2, 21);  // three per category
  const auto report = sis_select(rt.table, rt.train, rt.val, 3, 2);
  EXPECT_EQ(report.selected_columns().size(), 21u);
}

TEST(Sis, WidthIsSevenK) {
  const auto rt = oracle::random_screening_table(4, 3);
  for (int k : {1, 2, 5}) EXPECT_EQ(sis_select(rt.table, rt.train, rt.val, k, 3).selected_columns().size(), 7u * k);
}

TEST(Sis, TieBrokenByName) {
  FeatureTable t;
  t.columns = {"cube16_glcm_b", "cube16_glcm_a", "cube16_glcm_c"};
  std::vector<std::string> train, val;
  for (int r = 0; r < 40; ++r) {
    const int y = r % 2;
    const double v = y + 0.01 * r;
    t.add_row("r" + std::to_string(r), {v, v, -v}, y);
    (r < 24 ? train : val).push_back("r" + std::to_string(r));
  }
  const std::vector<std::string_view> cats{"glcm"};
  const auto report = sis_select(t, train, val, 1, 2, cats);
  EXPECT_EQ(report.selected_columns(), (std::vector<std::string>{"cube16_glcm_a"}));
}

TEST(Sis, ColumnOrderInvariant) {
  auto rt = oracle::random_screening_table(8, 3);
  auto before = sis_select(rt.table, rt.train, rt.val, 3, 3).selected_columns();
  FeatureTable shuffled;
  std::vector<std::size_t> order(rt.table.columns.size());
  for (std::size_t j = 0; j < order.size(); ++j) order[j] = order.size() - 1 - j;
  for (auto j : order) shuffled.columns.push_back(rt.table.columns[j]);
  for (std::size_t r = 0; r < rt.table.row_count(); ++r) {
    std::vector<double> row;
    for (auto j : order) row.push_back(rt.table.rows[r][j]);
    shuffled.add_row(rt.table.row_ids[r], row, rt.table.labels[r]);
  }
  auto after = sis_select(shuffled, rt.train, rt.val, 3, 3).selected_columns();
  std::sort(before.begin(), before.end());
  std::sort(after.begin(), after.end());
  EXPECT_EQ(before, after);
}

TEST(Sis, SelectedAucAboveThreshold) {
  const auto rt = oracle::random_screening_table(9, 2);
  const auto report = sis_select(rt.table, rt.train, rt.val, 2, 2);
  for (const auto& c : report.categories) {
    EXPECT_EQ(c.selected.size(), 2u);
    for (const auto& s : report.scores) {
      if (s.category != c.category) continue;
      const bool chosen = std::find(c.selected.begin(), c.selected.end(), s.feature) != c.selected.end();
      EXPECT_EQ(chosen, s.selected);
      if (chosen) EXPECT_GE(s.auc, c.threshold);
      else EXPECT_LE(s.auc, c.threshold);
    }
  }
}

TEST(Sis, SentinelColumnsExcluded) {
  auto rt = oracle::random_screening_table(10, 2);
  rt.table.rows[*rt.table.row_index(rt.train[3])][0] = kSentinel;
  const auto report = sis_select(rt.table, rt.train, rt.val, 2, 2);
  EXPECT_EQ(report.excluded, (std::vector<std::string>{rt.table.columns[0]}));
  for (const auto& s : report.scores) EXPECT_NE(s.feature, rt.table.columns[0]);
}

TEST(Sis, CategoryStarved) {
  FeatureTable t;
  t.columns = {"cube16_glcm_a", "cube16_ngtdm_b"};
  std::vector<std::string> train, val;
  for (int r = 0; r < 20; ++r) {
    t.add_row("r" + std::to_string(r), {static_cast<double>(r), kSentinel}, r % 2);
    (r < 12 ? train : val).push_back("r" + std::to_string(r));
  }
  const std::vector<std::string_view> cats{"glcm", "ngtdm"};
  EXPECT_EQ(code_of([&] { sis_select(t, train, val, 1, 2, cats); }), ErrorCode::kCategoryStarved);
}

TEST(Sis, Deterministic) {
  const auto rt = oracle::random_screening_table(12, 3);
  const auto a = sis_select(rt.table, rt.train, rt.val, 3, 3);
  const auto b = sis_select(rt.table, rt.train, rt.val, 3, 3);
  EXPECT_EQ(format_report_csv(a), format_report_csv(b));
}

TEST(Sis, SelectedListRoundTrip) {
  const auto rt = oracle::random_screening_table(2, 2);
  const auto report = sis_select(rt.table, rt.train, rt.val, 2, 2);
  EXPECT_EQ(parse_selected_list(format_selected_list(report)), report.selected_columns());
  const auto csv = format_report_csv(report, {{"k", "2"}});
  EXPECT_NE(csv.find("feature,category,auc,selected"), std::string::npos);
  EXPECT_NE(csv.find("k = 2"), std::string::npos);
}
