#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace palyno {

/// Rows of feature values with category labels. `labels[i]` indexes
/// `categories`; -1 marks an unlabeled row (e.g. unknown grains).
struct FeatureMatrix {
  std::vector<std::string> feature_names;
  std::vector<std::string> categories;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::vector<std::string> ids;

  [[nodiscard]] std::size_t n_rows() const noexcept { return rows.size(); }
  [[nodiscard]] std::size_t n_cols() const noexcept { return feature_names.size(); }

  /// Throws DimensionMismatch / UnknownCategory on inconsistent contents.
  void validate() const;
  /// Rows in `indices` order, same columns and category set.
  [[nodiscard]] FeatureMatrix subset_rows(const std::vector<std::size_t>& indices) const;
  /// Columns in `indices` order.
  [[nodiscard]] FeatureMatrix subset_cols(const std::vector<std::size_t>& indices) const;
  /// Row count per category.
  [[nodiscard]] std::vector<std::size_t> category_counts() const;
  /// Index of a category name, or -1.
  [[nodiscard]] int category_index(const std::string& name) const;
};

/// Header: source_id,label,<feature names>. Values are written with 17
/// significant digits so a round trip is exact.
void write_feature_csv(const std::filesystem::path& path, const FeatureMatrix& m);

/// Reads a feature CSV. Categories are the sorted distinct non-empty labels.
/// With `expected_columns`, any difference in the feature header raises
/// SchemaMismatch naming the first offending column.
FeatureMatrix read_feature_csv(const std::filesystem::path& path,
                               const std::vector<std::string>* expected_columns = nullptr);

/// Reorders/filters columns by name; missing names raise SchemaMismatch.
FeatureMatrix align_columns(const FeatureMatrix& m, const std::vector<std::string>& names);

}  // namespace palyno
