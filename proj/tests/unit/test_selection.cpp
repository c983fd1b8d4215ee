#include <gtest/gtest.h>

#include <set>

#include "oracles.hpp"
#include "palyno/random.hpp"
#include "palyno/selection.hpp"
#include "test_support.hpp"

namespace palyno::selection {
namespace {

FeatureMatrix one_column(const std::vector<std::vector<double>>& per_category) {
  FeatureMatrix m;
  m.feature_names = {"f"};
  for (std::size_t c = 0; c < per_category.size(); ++c) {
    m.categories.push_back("c" + std::to_string(c));
    for (double v : per_category[c]) {
      m.rows.push_back({v});
      m.labels.push_back(static_cast<int>(c));
      m.ids.push_back(std::to_string(m.ids.size()));
    }
  }
  return m;
}

TEST(Normalization, FitSingleRowAndRange) {
  FeatureMatrix m = one_column({{3.0}});
  auto p = fit_normalization(m);
  EXPECT_EQ(p.min, std::vector<double>{3.0});
  EXPECT_EQ(p.max, std::vector<double>{3.0});
  p = fit_normalization(one_column({{2.0, 3.5}, {4.0}}));
  EXPECT_EQ(p.min[0], 2.0);
  EXPECT_EQ(p.max[0], 4.0);
  EXPECT_THROW(fit_normalization(FeatureMatrix{}), Error);
}

TEST(Normalization, ApplyMapsRangeAndClamps) {
  const FeatureMatrix train = one_column({{2.0, 4.0}});
  const auto p = fit_normalization(train);
  const auto n = apply_normalization(train, p);
  EXPECT_EQ(n.rows[0][0], 0.0);
  EXPECT_EQ(n.rows[1][0], 100.0);
  EXPECT_EQ(normalize_row({1.0}, p)[0], 0.0);
  EXPECT_EQ(normalize_row({9.0}, p)[0], 100.0);
  EXPECT_DOUBLE_EQ(normalize_row({3.0}, p)[0], 50.0);
  EXPECT_EQ(normalize_row({7.0}, fit_normalization(one_column({{5.0, 5.0}})))[0], 0.0);
  try {
    normalize_row({1.0, 2.0}, p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DimensionMismatch);
  }
}

TEST(Fisher, ConstantFeatureScoresZero) {
  const auto s = fisher_scores(one_column({{5, 5}, {5, 5, 5}}));
  EXPECT_EQ(s.score[0], 0.0);
  EXPECT_FALSE(s.capped[0]);
}

TEST(Fisher, ZeroWithinVarianceIsCapped) {
  const auto s = fisher_scores(one_column({{10, 10}, {90, 90}}));
  EXPECT_EQ(s.score[0], kFisherCap);
  EXPECT_TRUE(s.capped[0]);
}

TEST(Fisher, HandComputedExample) {
  const auto m = one_column({{0, 20}, {60, 80}});
  EXPECT_NEAR(fisher_scores(m).score[0], 18.0, 1e-12);
  EXPECT_NEAR(oracle::fisher(m, 0).score, 18.0, 1e-12);
}

TEST(Fisher, TooFewCategories) {
  try {
    fisher_scores(one_column({{1, 2, 3}}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::TooFewCategories);
  }
}

TEST(Fisher, MatchesBruteForceOnRandomMatrices) {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    Rng rng(seed);
    const int cats = 2 + seed % 4;
    FeatureMatrix m = test::blobs(cats, 3 + seed % 5, 6, 1.5, seed);
    // Make one column constant and one perfectly separating with no spread.
    for (std::size_t i = 0; i < m.rows.size(); ++i) {
      m.rows[i][4] = 7.0;
      m.rows[i][5] = 10.0 * m.labels[i];
    }
    const auto s = fisher_scores(m);
    for (std::size_t f = 0; f < m.n_cols(); ++f) {
      const auto o = oracle::fisher(m, f);
      EXPECT_EQ(s.capped[f], o.capped) << seed << "/" << f;
      EXPECT_NEAR(s.score[f], o.score, 1e-9 * std::max(1.0, o.score)) << seed << "/" << f;
    }
  }
}

TEST(SelectTop, FractionOneIsFullRanking) {
  FisherScores s{{2.0, 7.0, 1.0, 7.0}, std::vector<bool>(4)};
  EXPECT_EQ(select_top(s, {1.0, {}}), (std::vector<std::size_t>{1, 3, 0, 2}));
}

TEST(SelectTop, ExplicitCountAndTies) {
  FisherScores s{{5.0, 1.0, 9.0}, std::vector<bool>(3)};
  SelectionConfig c;
  c.count = 2;
  EXPECT_EQ(select_top(s, c), (std::vector<std::size_t>{2, 0}));
  FisherScores tied{{3.0, 3.0, 3.0}, std::vector<bool>(3)};
  EXPECT_EQ(select_top(tied, c), (std::vector<std::size_t>{0, 1}));
}

TEST(SelectTop, CountOutOfRange) {
  FisherScores s{{1.0, 2.0}, std::vector<bool>(2)};
  SelectionConfig c;
  c.count = 3;
  EXPECT_THROW(select_top(s, c), Error);
  EXPECT_THROW(select_top(s, {0.0, {}}), Error);
  EXPECT_EQ(SelectionConfig{}.fraction, 0.02);
  EXPECT_EQ(SelectionConfig{}.resolve(470), 9u);
}

TEST(SelectTop, InvariantUnderMonotoneRescaling) {
  FisherScores s{{0.3, 4.0, 2.5, 0.01, 9.0, 2.5}, std::vector<bool>(6)};
  FisherScores t = s;
  for (double& v : t.score) v = std::log1p(v) * 3.0 + 1.0;
  for (double f : {0.2, 0.5, 1.0}) EXPECT_EQ(select_top(s, {f, {}}), select_top(t, {f, {}}));
}

TEST(SelectTop, SmallerFractionIsSubset) {
  const auto m = test::blobs(3, 10, 40, 2.0, 3);
  const auto s = fisher_scores(apply_normalization(m, fit_normalization(m)));
  std::set<std::size_t> prev;
  for (double f : {0.05, 0.1, 0.25, 0.5, 1.0}) {
    const auto idx = select_top(s, {f, {}});
    const std::set<std::size_t> cur(idx.begin(), idx.end());
    EXPECT_TRUE(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
    prev = cur;
  }
}

TEST(Selection, AffineRescalingAbsorbedByNormalization) {
  const auto m = test::blobs(3, 12, 8, 1.0, 11);
  FeatureMatrix scaled = m;
  for (auto& r : scaled.rows)
    for (std::size_t f = 0; f < r.size(); ++f) r[f] = (f + 2.0) * r[f] - 3.0 * f;
  const auto a = run_selection(m, {0.5, {}}), b = run_selection(scaled, {0.5, {}});
  EXPECT_EQ(a.selected, b.selected);
  for (std::size_t f = 0; f < 8; ++f) EXPECT_NEAR(a.scores.score[f], b.scores.score[f], 1e-9 * a.scores.score[f]);
}

TEST(Selection, SaveLoadRoundTrip) {
  const auto dir = test::temp_dir("selection");
  const auto sel = run_selection(test::blobs(2, 6, 10, 3.0, 2), {0.3, {}});
  save_selection(dir / "s.json", sel);
  const auto back = load_selection(dir / "s.json");
  EXPECT_EQ(back.selected, sel.selected);
  EXPECT_EQ(back.feature_names, sel.feature_names);
  EXPECT_EQ(back.norm.min, sel.norm.min);
  EXPECT_EQ(back.scores.score, sel.scores.score);
  EXPECT_THROW(load_selection(dir / "missing.json"), Error);
}

}  // namespace
}  // namespace palyno::selection
