#include "palyno/selection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "palyno/error.hpp"
#include "palyno/features.hpp"

namespace palyno::selection {

using nlohmann::json;

std::size_t SelectionConfig::resolve(std::size_t n_features) const {
  std::size_t n = 0;
  if (count) {
    n = *count;
  } else {
    if (!(fraction > 0.0 && fraction <= 1.0))
      throw Error(Errc::CountOutOfRange, "selection fraction must lie in (0, 1]");
    n = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n_features))));
  }
  if (n < 1 || n > n_features)
    throw Error(Errc::CountOutOfRange, "selection count " + std::to_string(n) + " outside [1, " +
                                           std::to_string(n_features) + "]");
  return n;
}

NormParams fit_normalization(const FeatureMatrix& train) {
  if (train.rows.empty()) throw Error(Errc::EmptyMatrix, "fit_normalization: no rows");
  train.validate();
  NormParams p;
  p.min = train.rows.front();
  p.max = train.rows.front();
  for (const auto& r : train.rows)
    for (std::size_t j = 0; j < r.size(); ++j) {
      p.min[j] = std::min(p.min[j], r[j]);
      p.max[j] = std::max(p.max[j], r[j]);
    }
  return p;
}

std::vector<double> normalize_row(const std::vector<double>& row, const NormParams& p) {
  if (row.size() != p.min.size() || p.max.size() != p.min.size())
    throw Error(Errc::DimensionMismatch, "normalization: row has " + std::to_string(row.size()) +
                                             " features, parameters have " + std::to_string(p.min.size()));
  std::vector<double> out(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) {
    const double span = p.max[j] - p.min[j];
    out[j] = span > 0.0 ? std::clamp(100.0 * (row[j] - p.min[j]) / span, 0.0, 100.0) : 0.0;
  }
  return out;
}

FeatureMatrix apply_normalization(const FeatureMatrix& m, const NormParams& p) {
  if (m.n_cols() != p.min.size())
    throw Error(Errc::DimensionMismatch, "apply_normalization: matrix has " + std::to_string(m.n_cols()) +
                                             " columns, parameters have " + std::to_string(p.min.size()));
  FeatureMatrix out = m;
  for (auto& r : out.rows) r = normalize_row(r, p);
  return out;
}

FisherScores fisher_scores(const FeatureMatrix& m) {
  m.validate();
  const auto counts = m.category_counts();
  std::vector<std::size_t> present;
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (counts[c] > 0) present.push_back(c);
  if (present.size() < 2) throw Error(Errc::TooFewCategories, "fisher_scores: need at least 2 categories with rows");

  const std::size_t F = m.n_cols(), C = counts.size();
  const double N = static_cast<double>(present.size());
  FisherScores s{std::vector<double>(F, 0.0), std::vector<bool>(F, false)};
  std::vector<double> class_sum(C), class_sq(C);
  for (std::size_t f = 0; f < F; ++f) {
    std::fill(class_sum.begin(), class_sum.end(), 0.0);
    double total = 0.0, labelled = 0.0;
    for (std::size_t i = 0; i < m.rows.size(); ++i) {
      if (m.labels[i] < 0) continue;
      class_sum[m.labels[i]] += m.rows[i][f];
      total += m.rows[i][f];
      labelled += 1.0;
    }
    const double mean = total / labelled;
    std::fill(class_sq.begin(), class_sq.end(), 0.0);
    for (std::size_t i = 0; i < m.rows.size(); ++i) {
      if (m.labels[i] < 0) continue;
      const auto c = static_cast<std::size_t>(m.labels[i]);
      const double d = m.rows[i][f] - class_sum[c] / static_cast<double>(counts[c]);
      class_sq[c] += d * d;
    }
    double num = 0.0, den = 0.0;
    for (std::size_t c : present) {
      const double cm = class_sum[c] / static_cast<double>(counts[c]);
      num += (mean - cm) * (mean - cm);
      den += class_sq[c] / static_cast<double>(counts[c]);
    }
    if (den < kFisherEpsilon) {
      if (num >= kFisherEpsilon) {
        s.score[f] = kFisherCap;
        s.capped[f] = true;
      }
    } else {
      s.score[f] = num / den * N / (N - 1.0);
    }
  }
  return s;
}

std::vector<std::size_t> select_top(const FisherScores& s, const SelectionConfig& c) {
  const std::size_t n = c.resolve(s.score.size());
  std::vector<std::size_t> idx(s.score.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s.score[a] > s.score[b]; });
  idx.resize(n);
  return idx;
}

Selection run_selection(const FeatureMatrix& train, const SelectionConfig& c) {
  Selection sel;
  sel.feature_names = train.feature_names;
  sel.norm = fit_normalization(train);
  sel.scores = fisher_scores(apply_normalization(train, sel.norm));
  sel.selected = select_top(sel.scores, c);
  sel.fraction = c.count ? static_cast<double>(*c.count) / static_cast<double>(train.n_cols()) : c.fraction;
  return sel;
}

void save_selection(const std::filesystem::path& path, const Selection& s) {
  json j;
  j["format"] = "palyno-selection";
  j["version"] = kSelectionFormatVersion;
  j["catalog_version"] = features::kCatalogVersion;
  j["fraction"] = s.fraction;
  json ranked = json::array();
  for (std::size_t i : s.selected)
    ranked.push_back({{"name", s.feature_names[i]}, {"index", i}, {"score", s.scores.score[i]},
                      {"capped", static_cast<bool>(s.scores.capped[i])}});
  j["selected"] = ranked;
  j["features"] = s.feature_names;
  j["scores"] = s.scores.score;
  j["norm_min"] = s.norm.min;
  j["norm_max"] = s.norm.max;
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

Selection load_selection(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::FileNotFound, path.string());
  try {
    const json j = json::parse(in);
    if (j.at("format") != "palyno-selection" || j.at("version").get<int>() != kSelectionFormatVersion)
      throw Error(Errc::SchemaMismatch, path.string() + ": not a version-1 selection file");
    Selection s;
    s.feature_names = j.at("features").get<std::vector<std::string>>();
    s.scores.score = j.at("scores").get<std::vector<double>>();
    s.norm.min = j.at("norm_min").get<std::vector<double>>();
    s.norm.max = j.at("norm_max").get<std::vector<double>>();
    s.fraction = j.at("fraction").get<double>();
    s.scores.capped.assign(s.scores.score.size(), false);
    for (std::size_t i = 0; i < s.scores.score.size(); ++i) s.scores.capped[i] = s.scores.score[i] >= kFisherCap;
    for (const auto& r : j.at("selected")) s.selected.push_back(r.at("index").get<std::size_t>());
    const std::size_t F = s.feature_names.size();
    if (s.scores.score.size() != F || s.norm.min.size() != F || s.norm.max.size() != F)
      throw Error(Errc::SchemaMismatch, path.string() + ": inconsistent array lengths");
    for (std::size_t i : s.selected)
      if (i >= F) throw Error(Errc::SchemaMismatch, path.string() + ": selected index out of range");
    return s;
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptData, path.string() + ": " + e.what());
  }
}

}  // namespace palyno::selection
