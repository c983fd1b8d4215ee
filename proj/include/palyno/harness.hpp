#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "palyno/authentication.hpp"
#include "palyno/classifiers.hpp"
#include "palyno/dataset.hpp"
#include "palyno/focus.hpp"
#include "palyno/segmentation.hpp"
#include "palyno/synth.hpp"

namespace palyno::harness {

inline constexpr int kManifestVersion = 1;
inline constexpr int kReportSchemaVersion = 1;

// --- data sources -------------------------------------------------------

enum class Role { Inlier, Outlier };

struct ManifestEntry {
  std::string category;
  std::filesystem::path path;  // stack directory (plane_<k>.png) or single image
  Role role = Role::Inlier;
};

struct Manifest {
  int version = kManifestVersion;
  std::vector<ManifestEntry> entries;

  /// Sorted distinct categories with the given role.
  [[nodiscard]] std::vector<std::string> categories(Role role) const;
};

/// Reads `<root>/manifest.json` if present (or `root` itself when it is a
/// JSON file), otherwise scans `<root>/<category>/<stack_id>/plane_<k>.png`
/// and treats every category as an inlier. Relative paths resolve against
/// the manifest's directory; missing paths raise FileNotFound.
Manifest load_manifest(const std::filesystem::path& root);
void save_manifest(const std::filesystem::path& file, const Manifest& m);

/// Loads the planes of a stack directory ordered by plane index.
FocalStack load_stack(const std::filesystem::path& dir);

/// Category name used for synthetic type `t`.
std::string synth_category(int type_id);

/// Renders `n_types + n_outlier_types` types x `grains_per_type` stacks into
/// `out` using the directory layout, plus manifest.json and per-stack
/// truth.json. Returns the manifest.
Manifest write_synthetic_dataset(const synth::SynthConfig& cfg, const std::filesystem::path& out, int threads);

// --- pipeline -----------------------------------------------------------

struct PipelineParams {
  focus::MeasureKind focus_measure = focus::MeasureKind::AbsoluteGradient;
  seg::CoarseParams coarse;
  seg::SnakeParams snake;
};

/// Focus -> segment -> extract for every manifest entry. Row ids are
/// "<category>/<stack>#<grain>"; categories are the sorted manifest
/// categories of both roles. Entries without a grain are skipped (logged).
FeatureMatrix build_feature_matrix(const Manifest& m, const PipelineParams& p, int threads);

/// Same, for in-memory synthetic stacks (used by tests and benchmarks):
/// stack k of type t yields ids "type_tt/kkkk#g".
FeatureMatrix build_synthetic_matrix(const synth::SynthConfig& cfg, const std::vector<int>& types,
                                     const PipelineParams& p, int threads);

// --- experiments --------------------------------------------------------

struct ExperimentConfig {
  std::vector<int> p_range;  // empty = 2..15 clipped to the available categories
  int repeats = 10;
  double train_fraction = 0.75;
  std::uint64_t seed = 1;
  std::vector<classify::ModelKind> classifiers{classify::ModelKind::Wnd5, classify::ModelKind::DecisionTree,
                                               classify::ModelKind::RandomForest, classify::ModelKind::NeuralNet};
  std::vector<double> sweep_fractions{0.01, 0.02, 0.05, 0.10, 0.15};
  std::vector<auth::ThetaCondition> conditions{auth::kAllConditions.begin(), auth::kAllConditions.end()};
  double profile_fraction = 0.0;  // > 0: profiles from a third split carved out of training
  classify::TrainOptions train;
  int threads = 1;

  void validate() const;
  [[nodiscard]] std::vector<int> resolved_p_range(std::size_t available) const;
};

/// Uniform random p-subset of category indices (sorted); p = n gives all.
std::vector<int> build_subdataset(std::size_t n_categories, int p, std::uint64_t seed);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Stratified split of the rows whose labels are in `categories`: per
/// category, floor((1 - train_fraction) * n) test rows, the rest train.
Split split_dataset(const FeatureMatrix& m, const std::vector<int>& categories, double train_fraction,
                    std::uint64_t seed);

struct ClassificationRow {
  int p = 0;
  int repeat = 0;
  std::string classifier;
  int n_features = 0;
  double accuracy = 0.0;
};

struct SweepRow {
  int p = 0;
  int repeat = 0;
  std::string classifier;
  double fraction = 0.0;
  int n_features = 0;
  double accuracy = 0.0;
};

struct AuthRow {
  int p = 0;
  int repeat = 0;
  std::string condition;
  double alpha_in = 0.0;
  double alpha_out = 0.0;
  int n_inliers = 0;
  int n_outliers = 0;
};

struct Aggregate {
  std::string key;  // classifier or condition
  int p = 0;
  double x = 0.0;  // fraction for sweeps, unused otherwise
  double mean = 0.0;
  double sd = 0.0;  // sample SD, 0 for a single value
  int n = 0;
};

struct Report {
  nlohmann::json config;  // echo of flags / parameters
  std::vector<ClassificationRow> classification;
  std::vector<SweepRow> sweep;
  std::vector<AuthRow> authentication;
  double runtime_seconds = 0.0;  // written to timing.json only

  [[nodiscard]] std::vector<Aggregate> classification_summary() const;
  [[nodiscard]] std::vector<Aggregate> sweep_summary() const;
  /// Two aggregates per (condition, p): keys "<cond>:in" and "<cond>:out".
  [[nodiscard]] std::vector<Aggregate> authentication_summary() const;
};

/// Classification accuracy per (p, repeat, classifier) and the feature-count
/// sweep (WND-5 / NN at the largest p). Rows labeled -1 or with outlier
/// categories listed in `exclude` are ignored.
Report run_classification_experiment(const FeatureMatrix& data, const ExperimentConfig& cfg,
                                     const std::vector<std::string>& exclude = {});

/// Open-set runs: inlier categories from `inliers`, outliers from `outliers`.
Report run_authentication_experiment(const FeatureMatrix& data, const ExperimentConfig& cfg,
                                     const std::vector<std::string>& inliers,
                                     const std::vector<std::string>& outliers);

/// Writes classification.csv, feature_sweep.csv, authentication.csv, the
/// per-figure summary CSVs, summary.json and timing.json into `dir`.
void emit_report(const Report& r, const std::filesystem::path& dir);
Report load_report(const std::filesystem::path& dir);

// --- parameters ---------------------------------------------------------

/// Every tunable default in one place; JSON files override fields by name.
struct Params {
  synth::SynthConfig synth;
  PipelineParams pipeline;
  ExperimentConfig experiment;  // includes the classifier training options
};

nlohmann::json params_to_json(const Params& p);
/// Overrides only the keys present; unknown keys raise InvalidArgument.
void merge_params_json(const nlohmann::json& j, Params& p);
Params load_params(const std::filesystem::path& file);

}  // namespace palyno::harness
