#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "palyno/dataset.hpp"

namespace palyno::selection {

inline constexpr int kSelectionFormatVersion = 1;
inline constexpr double kFisherCap = 1e12;
inline constexpr double kFisherEpsilon = 1e-12;
inline constexpr double kDefaultFraction = 0.02;

struct NormParams {
  std::vector<double> min;
  std::vector<double> max;
};

struct FisherScores {
  std::vector<double> score;
  std::vector<bool> capped;
};

/// Either a fraction in (0,1] of the features or an explicit count.
struct SelectionConfig {
  double fraction = kDefaultFraction;
  std::optional<std::size_t> count;

  /// max(1, round(fraction * n)) or the explicit count; CountOutOfRange if invalid.
  [[nodiscard]] std::size_t resolve(std::size_t n_features) const;
};

NormParams fit_normalization(const FeatureMatrix& train);
/// 100*(v-min)/(max-min) clamped to [0,100]; constant features map to 0.
FeatureMatrix apply_normalization(const FeatureMatrix& m, const NormParams& p);
std::vector<double> normalize_row(const std::vector<double>& row, const NormParams& p);

/// Fisher score per feature over the categories that have rows.
FisherScores fisher_scores(const FeatureMatrix& normalized);

/// Top-n indices by descending score, ties to the lower index.
std::vector<std::size_t> select_top(const FisherScores& s, const SelectionConfig& c);

/// Everything `select` produces: ranked features plus the normalization.
struct Selection {
  std::vector<std::string> feature_names;  // full column set the scores refer to
  NormParams norm;
  FisherScores scores;
  std::vector<std::size_t> selected;  // ranked
  double fraction = kDefaultFraction;
};

Selection run_selection(const FeatureMatrix& train, const SelectionConfig& c);
void save_selection(const std::filesystem::path& path, const Selection& s);
Selection load_selection(const std::filesystem::path& path);

}  // namespace palyno::selection
