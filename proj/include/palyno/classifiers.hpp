#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "palyno/dataset.hpp"
#include "palyno/selection.hpp"

namespace palyno::classify {

inline constexpr int kModelFormatVersion = 1;
inline constexpr double kWndEpsilon = 1e-12;
inline constexpr double kWndExponent = -5.0;
inline constexpr int kDefaultTrees = 500;

// --- WND-5 --------------------------------------------------------------

/// Argmax treats d as a similarity (the p = -5 semantics); Shortest takes the
/// smallest d literally.
enum class WndRule { Argmax, Shortest };

struct WndModel {
  std::vector<std::vector<double>> rows;  // normalized training rows, selected features
  std::vector<int> labels;
  int n_categories = 0;
  std::vector<double> weights;  // Fisher scores of the selected features
  double p = kWndExponent;
  WndRule rule = WndRule::Argmax;
};

WndModel train_wnd(const FeatureMatrix& train, const std::vector<double>& weights, double p = kWndExponent);
double wnd5_distance(const std::vector<double>& z, const WndModel& model, int category);
int wnd5_classify(const std::vector<double>& z, const WndModel& model);

// --- trees and forests --------------------------------------------------

double gini_impurity(const std::vector<std::size_t>& counts);

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // go left when value <= threshold
  int left = -1;
  int right = -1;
  int label = 0;  // majority label of the training rows reaching the node
  std::vector<std::size_t> counts;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  int n_categories = 0;

  [[nodiscard]] int predict(const std::vector<double>& z) const;
  [[nodiscard]] std::size_t leaf_count() const;
  [[nodiscard]] int depth() const;
};

struct TreeParams {
  int max_depth = 0;  // 0 = unlimited
  int min_samples_split = 2;
  int max_features = 0;  // features tried per split; 0 = all
};

/// CART growth with Gini gain over midpoints of sorted unique values.
DecisionTree train_tree(const FeatureMatrix& train, const TreeParams& params = {}, std::uint64_t seed = 0);
/// Reduced-error pruning to a fix point.
DecisionTree prune_tree(const DecisionTree& tree, const FeatureMatrix& pruning_set);
/// Stratified grow/prune split (`grow_fraction` of each category grows), then pruning.
DecisionTree train_pruned_tree(const FeatureMatrix& train, const TreeParams& params, std::uint64_t seed,
                               double grow_fraction = 2.0 / 3.0);

struct ForestModel {
  std::vector<DecisionTree> trees;
  std::vector<std::uint64_t> tree_seeds;
  int n_categories = 0;
  double oob_accuracy = -1.0;  // -1 when no row was ever out of bag
};

struct VoteTally {
  std::vector<int> votes;

  [[nodiscard]] int total() const;
  /// Category with most votes (lowest index on ties).
  [[nodiscard]] int winner() const;
  /// Second-ranked category (lowest index on ties, excluding the winner); -1 if one category.
  [[nodiscard]] int runner_up() const;
};

ForestModel train_forest(const FeatureMatrix& train, int n_trees = kDefaultTrees, std::uint64_t seed = 0,
                         int threads = 1);
VoteTally forest_votes(const ForestModel& model, const std::vector<double>& z);
int forest_classify(const ForestModel& model, const std::vector<double>& z);

// --- single-layer softmax network ---------------------------------------

struct PerceptronNet {
  int n_inputs = 0;
  int n_categories = 0;
  std::vector<double> weights;  // (n_inputs + 1) x n_categories, row-major, last row = bias
  bool trained = false;
  bool converged = false;
  int epochs_run = 0;
  double final_loss = 0.0;
  double final_grad_norm = 0.0;
};

struct NnParams {
  int epochs = 1000;
  double tolerance = 1e-5;
};

/// Mean cross-entropy of the softmax outputs and its gradient.
double nn_loss_and_gradient(const std::vector<double>& weights, const FeatureMatrix& train, int n_categories,
                            std::vector<double>* gradient);
/// Moller's scaled conjugate gradient from zero weights. Hitting the epoch
/// limit leaves `converged` false (NonConvergence is reported, not thrown).
PerceptronNet train_nn(const FeatureMatrix& train, const NnParams& params = {}, std::uint64_t seed = 0,
                       std::vector<double>* loss_trace = nullptr);
std::vector<double> nn_probabilities(const PerceptronNet& net, const std::vector<double>& z);
int nn_classify(const PerceptronNet& net, const std::vector<double>& z);

// --- uniform model wrapper ----------------------------------------------

enum class ModelKind { Wnd5, DecisionTree, RandomForest, NeuralNet };
std::string_view to_string(ModelKind kind) noexcept;
ModelKind parse_model_kind(std::string_view name);

struct TrainOptions {
  double selection_fraction = selection::kDefaultFraction;  // WND-5 and NN
  double wnd_exponent = kWndExponent;
  WndRule wnd_rule = WndRule::Argmax;
  TreeParams tree;
  bool prune = true;
  double grow_fraction = 2.0 / 3.0;
  int n_trees = kDefaultTrees;
  NnParams nn;
  int threads = 1;
};

/// A trained classifier plus everything needed to apply it to raw rows.
struct TrainedModel {
  ModelKind kind = ModelKind::RandomForest;
  std::vector<std::string> categories;
  std::vector<std::string> input_features;  // expected raw columns, in order
  std::optional<selection::NormParams> norm;  // WND-5 / NN only
  std::vector<std::size_t> selected;          // WND-5 / NN: ranked input indices
  WndModel wnd;
  DecisionTree tree;
  ForestModel forest;
  PerceptronNet net;
};

TrainedModel train_model(ModelKind kind, const FeatureMatrix& train, const TrainOptions& opts, std::uint64_t seed);
/// Prediction for one raw row (aligned to `input_features`).
int predict(const TrainedModel& model, const std::vector<double>& raw);

struct SampleRecord {
  std::string id;
  int truth = -1;
  int predicted = -1;
  std::optional<VoteTally> tally;  // forests only
};

struct Evaluation {
  double accuracy = 0.0;
  std::vector<SampleRecord> records;
};

/// Test columns must match the model's input features; labels index the
/// model's categories.
Evaluation evaluate(const TrainedModel& model, const FeatureMatrix& test);

void save_model(const std::filesystem::path& path, const TrainedModel& model);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace palyno::classify
