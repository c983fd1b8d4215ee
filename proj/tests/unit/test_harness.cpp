#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "palyno/harness.hpp"
#include "palyno/image.hpp"
#include "test_support.hpp"

namespace palyno::harness {
namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.p_range = {2, 3};
  cfg.repeats = 3;
  cfg.sweep_fractions = {0.1, 0.5};
  cfg.train.n_trees = 25;
  cfg.train.selection_fraction = 0.1;
  cfg.seed = 9;
  return cfg;
}

// Sample SD by direct summation.
std::pair<double, double> mean_sd(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x / v.size();
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, v.size() > 1 ? std::sqrt(s / (v.size() - 1)) : 0.0};
}

// --- synthetic generator ---

TEST(Synth, SharpPlaneIsCleanPlusNoise) {
  synth::SynthConfig cfg;
  const auto s = synth::synth_stack(cfg, 0, 3);
  ASSERT_EQ(s.stack.planes.size(), 31u);
  const Image& sharp = s.stack.planes[s.sharp_plane];
  double sum = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < sharp.size(); ++i) {
    const double d = sharp.values()[i] - s.clean.values()[i];
    sum += d;
    sq += d * d;
  }
  const double n = static_cast<double>(sharp.size());
  EXPECT_NEAR(sum / n, 0.0, 0.002);
  EXPECT_NEAR(std::sqrt(sq / n), cfg.noise_sigma, 0.003);
}

TEST(Synth, SameSeedSameStack) {
  synth::SynthConfig cfg;
  cfg.planes = 7;
  cfg.sharp_plane = 3;
  const auto a = synth::synth_stack(cfg, 2, 11), b = synth::synth_stack(cfg, 2, 11), c = synth::synth_stack(cfg, 2, 12);
  for (std::size_t k = 0; k < a.stack.planes.size(); ++k) EXPECT_EQ(a.stack.planes[k], b.stack.planes[k]);
  EXPECT_NE(a.stack.planes[3], c.stack.planes[3]);
}

TEST(Synth, DisjointRadiusRangesSeparateAreas) {
  synth::SynthConfig cfg;
  synth::TypeStyle small = synth::default_style(0), large = synth::default_style(0);
  small.radius_min = 14;
  small.radius_max = 17;
  large.radius_min = 24;
  large.radius_max = 28;
  cfg.styles = {small, large};
  cfg.n_types = 2;
  cfg.n_outlier_types = 0;
  double max_small = 0.0, min_large = 1e9;
  for (std::uint64_t s = 0; s < 15; ++s) {
    const auto a = synth::synth_field(cfg, 0, s), b = synth::synth_field(cfg, 1, s);
    max_small = std::max(max_small, static_cast<double>(seg::mask_area(a.grains[0].mask)));
    min_large = std::min(min_large, static_cast<double>(seg::mask_area(b.grains[0].mask)));
  }
  EXPECT_LT(max_small, min_large);
}

TEST(Synth, InvalidConfigRejected) {
  synth::SynthConfig cfg;
  cfg.sharp_plane = 31;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.planes = 0;
  EXPECT_THROW(cfg.validate(), Error);
}

// --- sub-datasets and splits ---

TEST(Subdataset, FullCountIsIdentity) {
  EXPECT_EQ(build_subdataset(5, 5, 42), (std::vector<int>{0, 1, 2, 3, 4}));
}

TEST(Subdataset, DeterministicAndCovering) {
  EXPECT_EQ(build_subdataset(15, 2, 7), build_subdataset(15, 2, 7));
  std::set<int> seen;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto sub = build_subdataset(15, 2, s);
    ASSERT_EQ(sub.size(), 2u);
    EXPECT_LT(sub[0], sub[1]);
    seen.insert(sub.begin(), sub.end());
  }
  EXPECT_EQ(seen.size(), 15u);
  try {
    build_subdataset(3, 4, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::CountOutOfRange);
  }
}

TEST(Split, NinetyThirtyAndThreeOne) {
  const FeatureMatrix big = test::blobs(2, 120, 2, 1.0, 1);
  const Split s = split_dataset(big, {0, 1}, 0.75, 5);
  EXPECT_EQ(s.train.size(), 180u);
  EXPECT_EQ(s.test.size(), 60u);
  std::vector<int> test_per(2);
  for (std::size_t i : s.test) test_per[big.labels[i]] += 1;
  EXPECT_EQ(test_per, (std::vector<int>{30, 30}));
  std::set<std::size_t> train(s.train.begin(), s.train.end());
  for (std::size_t i : s.test) EXPECT_FALSE(train.contains(i));

  const FeatureMatrix small = test::blobs(1, 4, 2, 1.0, 2);
  const Split t = split_dataset(small, {0}, 0.75, 5);
  EXPECT_EQ(t.train.size(), 3u);
  EXPECT_EQ(t.test.size(), 1u);
}

TEST(Split, OnlyRequestedCategoriesAndTooFewSamples) {
  const FeatureMatrix m = test::blobs(3, 8, 2, 1.0, 3);
  const Split s = split_dataset(m, {2}, 0.75, 1);
  for (std::size_t i : s.train) EXPECT_EQ(m.labels[i], 2);
  for (std::size_t i : s.test) EXPECT_EQ(m.labels[i], 2);
  try {
    split_dataset(test::blobs(1, 1, 2, 1.0, 4), {0}, 0.75, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::TooFewSamples);
  }
}

TEST(Config, DefaultsAndValidation) {
  const ExperimentConfig cfg;
  EXPECT_EQ(cfg.repeats, 10);
  EXPECT_DOUBLE_EQ(cfg.train_fraction, 0.75);
  EXPECT_EQ(cfg.resolved_p_range(20).front(), 2);
  EXPECT_EQ(cfg.resolved_p_range(20).back(), 15);
  EXPECT_EQ(cfg.resolved_p_range(5).back(), 5);
  ExperimentConfig bad;
  bad.repeats = 0;
  EXPECT_THROW(bad.validate(), Error);
  bad = {};
  bad.p_range = {2, 9};
  EXPECT_THROW(bad.resolved_p_range(5), Error);
}

// --- experiments ---

class Experiments : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { data = new FeatureMatrix(test::blobs(5, 16, 20, 6.0, 21)); }
  static void TearDownTestSuite() { delete data; }
  static FeatureMatrix* data;
};
FeatureMatrix* Experiments::data = nullptr;

TEST_F(Experiments, ClassificationRowCountsAndAccuracy) {
  const auto cfg = small_config();
  const Report r = run_classification_experiment(*data, cfg);
  EXPECT_EQ(r.classification.size(), 2u * 3u * 4u);
  EXPECT_EQ(r.sweep.size(), 3u * 2u * 2u);  // repeats x {wnd5, nn} x fractions at p = 3
  for (const auto& row : r.sweep) EXPECT_EQ(row.p, 3);
  for (const auto& a : r.classification_summary())
    if (a.key == "rf") EXPECT_GE(a.mean, 0.9);
  EXPECT_EQ(r.classification_summary().size(), 2u * 4u);
}

TEST_F(Experiments, ExcludedCategoriesAreIgnored) {
  auto cfg = small_config();
  cfg.p_range = {4};
  cfg.classifiers = {classify::ModelKind::DecisionTree};
  EXPECT_NO_THROW(run_classification_experiment(*data, cfg, {"c4"}));
  cfg.p_range = {5};
  EXPECT_THROW(run_classification_experiment(*data, cfg, {"c4"}), Error);
}

TEST_F(Experiments, ReproducibleAcrossThreadCounts) {
  auto cfg = small_config();
  cfg.threads = 1;
  const Report a = run_classification_experiment(*data, cfg);
  cfg.threads = 3;
  const Report b = run_classification_experiment(*data, cfg);
  ASSERT_EQ(a.classification.size(), b.classification.size());
  for (std::size_t i = 0; i < a.classification.size(); ++i) {
    EXPECT_EQ(a.classification[i].classifier, b.classification[i].classifier);
    EXPECT_EQ(a.classification[i].accuracy, b.classification[i].accuracy);
  }
  const auto d1 = test::temp_dir("rep1"), d2 = test::temp_dir("rep2");
  emit_report(a, d1);
  emit_report(b, d2);
  for (const char* f : {"classification.csv", "feature_sweep.csv", "summary.json", "accuracy_vs_p.csv"})
    EXPECT_EQ(slurp(d1 / f), slurp(d2 / f)) << f;
}

TEST_F(Experiments, AuthenticationReportsAllConditions) {
  auto cfg = small_config();
  cfg.p_range = {2, 3};
  const Report r = run_authentication_experiment(*data, cfg, {"c0", "c1", "c2"}, {"c4"});
  EXPECT_EQ(r.authentication.size(), 2u * 3u * 4u);
  std::set<std::string> conds;
  for (const auto& row : r.authentication) {
    conds.insert(row.condition);
    EXPECT_GT(row.n_outliers, 0);
    EXPECT_GE(row.alpha_in, 0.0);
    EXPECT_LE(row.alpha_out, 1.0);
  }
  EXPECT_EQ(conds.size(), 4u);
  double in = 0.0;
  for (const auto& a : r.authentication_summary())
    if (a.key == "theta21:in") in = std::max(in, a.mean);
  EXPECT_GT(in, 0.0);
  try {
    run_authentication_experiment(*data, cfg, {"c0", "c1"}, {"c1"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::CategoryOverlap);
  }
}

TEST_F(Experiments, ReportRoundTripAndAggregates) {
  const Report r = run_classification_experiment(*data, small_config());
  const auto dir = test::temp_dir("report");
  emit_report(r, dir);
  const Report back = load_report(dir);
  ASSERT_EQ(back.classification.size(), r.classification.size());
  for (std::size_t i = 0; i < r.classification.size(); ++i) {
    EXPECT_EQ(back.classification[i].accuracy, r.classification[i].accuracy);
    EXPECT_EQ(back.classification[i].p, r.classification[i].p);
  }
  EXPECT_EQ(back.sweep.size(), r.sweep.size());
  EXPECT_EQ(back.config, r.config);
  EXPECT_EQ(slurp(dir / "classification.csv").substr(0, 39), "p,repeat,classifier,n_features,accuracy");
  const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  EXPECT_EQ(summary.at("schema_version"), kReportSchemaVersion);

  for (const auto& a : r.classification_summary()) {
    std::vector<double> v;
    for (const auto& row : r.classification)
      if (row.classifier == a.key && row.p == a.p) v.push_back(row.accuracy);
    const auto [m, sd] = mean_sd(v);
    EXPECT_EQ(a.n, static_cast<int>(v.size()));
    EXPECT_NEAR(a.mean, m, 1e-12);
    EXPECT_NEAR(a.sd, sd, 1e-12);
  }
}

// --- parameters ---

TEST(Params, JsonRoundTripAndOverrides) {
  Params p;
  nlohmann::json j = params_to_json(p);
  Params q;
  merge_params_json(j, q);
  EXPECT_EQ(params_to_json(q), j);
  EXPECT_EQ(j.at("pipeline").at("snake").at("iterations"), 100);
  EXPECT_EQ(j.at("experiment").at("train").at("n_trees"), 500);

  merge_params_json(nlohmann::json::parse(R"({"synth": {"planes": 9, "sharp_plane": 4}, "experiment": {"repeats": 2}})"), q);
  EXPECT_EQ(q.synth.planes, 9);
  EXPECT_EQ(q.synth.sharp_plane, 4);
  EXPECT_EQ(q.experiment.repeats, 2);
  EXPECT_EQ(q.synth.n_types, p.synth.n_types);
}

TEST(Params, UnknownKeysAndWrongTypesRejected) {
  Params p;
  for (const char* bad : {R"({"synth": {"plane": 9}})", R"({"bogus": 1})", R"({"experiment": {"repeats": "ten"}})"}) {
    try {
      merge_params_json(nlohmann::json::parse(bad), p);
      FAIL() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::InvalidArgument) << bad;
    }
  }
}

// --- data sources ---

TEST(Dataset, SyntheticWriteLoadAndExtract) {
  const auto dir = test::temp_dir("synthdata");
  synth::SynthConfig cfg;
  cfg.n_types = 2;
  cfg.n_outlier_types = 1;
  cfg.grains_per_type = 2;
  cfg.planes = 5;
  cfg.sharp_plane = 2;
  const Manifest written = write_synthetic_dataset(cfg, dir, 2);
  EXPECT_EQ(written.entries.size(), 6u);
  const Manifest m = load_manifest(dir);
  EXPECT_EQ(m.categories(Role::Inlier), (std::vector<std::string>{"type_00", "type_01"}));
  EXPECT_EQ(m.categories(Role::Outlier), (std::vector<std::string>{"type_02"}));
  EXPECT_EQ(load_stack(m.entries[0].path).planes.size(), 5u);
  EXPECT_TRUE(std::filesystem::exists(m.entries[0].path / "truth.json"));

  const FeatureMatrix f = build_feature_matrix(m, PipelineParams{}, 1);
  EXPECT_EQ(f.categories.size(), 3u);
  EXPECT_EQ(f.n_rows(), 6u);
  for (const auto& id : f.ids) EXPECT_NE(id.find('#'), std::string::npos);

  // Layout scan without a manifest: every category becomes an inlier.
  std::filesystem::remove(dir / "manifest.json");
  const Manifest scanned = load_manifest(dir);
  EXPECT_EQ(scanned.entries.size(), 6u);
  EXPECT_EQ(scanned.categories(Role::Inlier).size(), 3u);
  EXPECT_THROW(load_manifest(dir / "nope"), Error);
}

TEST(Dataset, InMemoryMatrixMatchesWrittenIds) {
  synth::SynthConfig cfg;
  cfg.grains_per_type = 2;
  cfg.planes = 3;
  cfg.sharp_plane = 1;
  const FeatureMatrix a = build_synthetic_matrix(cfg, {0, 1}, PipelineParams{}, 1);
  const FeatureMatrix b = build_synthetic_matrix(cfg, {0, 1}, PipelineParams{}, 2);
  EXPECT_EQ(a.rows, b.rows);
  EXPECT_EQ(a.ids, b.ids);
  ASSERT_FALSE(a.ids.empty());
  EXPECT_EQ(a.ids[0].substr(0, 13), "type_00/0000#");
}

}  // namespace
}  // namespace palyno::harness
