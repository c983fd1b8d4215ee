#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include "palyno/dataset.hpp"
#include "palyno/image.hpp"

namespace palyno::test {

inline Image make_image(int w, int h, const std::function<double(int, int)>& f) {
  Image img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img(x, y) = f(x, y);
  return img;
}

inline BinaryMask disk_mask(int w, int h, double cx, double cy, double r) {
  BinaryMask m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m(x, y) = std::hypot(x - cx, y - cy) <= r;
  return m;
}

inline Image from_mask(const BinaryMask& m, double fg, double bg) {
  return make_image(m.width(), m.height(), [&](int x, int y) { return m(x, y) ? fg : bg; });
}

inline BinaryMask place(const BinaryMask& m, const BoundingBox& b, int w, int h) {
  BinaryMask out(w, h);
  for (int y = 0; y < b.h; ++y)
    for (int x = 0; x < b.w; ++x) out(b.x + x, b.y + y) = m(x, y);
  return out;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("palyno_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Gaussian blobs per category: row i of category c has feature f drawn
/// around c * separation (feature 0) and pure noise elsewhere.
inline FeatureMatrix blobs(int n_categories, int per_category, int n_features, double separation,
                           std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  FeatureMatrix m;
  for (int f = 0; f < n_features; ++f) m.feature_names.push_back("f" + std::to_string(f));
  for (int c = 0; c < n_categories; ++c) m.categories.push_back("c" + std::to_string(c));
  for (int c = 0; c < n_categories; ++c)
    for (int i = 0; i < per_category; ++i) {
      std::vector<double> row(n_features);
      for (int f = 0; f < n_features; ++f) row[f] = noise(rng) + (f == 0 ? c * separation : 0.0);
      m.rows.push_back(std::move(row));
      m.labels.push_back(c);
      m.ids.push_back("c" + std::to_string(c) + "_" + std::to_string(i));
    }
  return m;
}

}  // namespace palyno::test
