#include <cmath>

#include "palyno/classifiers.hpp"
#include "palyno/error.hpp"

namespace palyno::classify {

WndModel train_wnd(const FeatureMatrix& train, const std::vector<double>& weights, double p) {
  train.validate();
  if (weights.size() != train.n_cols())
    throw Error(Errc::DimensionMismatch, "train_wnd: " + std::to_string(weights.size()) + " weights for " +
                                             std::to_string(train.n_cols()) + " features");
  for (double w : weights)
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error(Errc::InvalidArgument, "train_wnd: weights must be finite and >= 0");
  const auto counts = train.category_counts();
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (counts[c] == 0) throw Error(Errc::TooFewSamples, "train_wnd: category '" + train.categories[c] + "' has no rows");
  if (counts.size() < 2) throw Error(Errc::TooFewCategories, "train_wnd: need at least 2 categories");

  WndModel m;
  m.n_categories = static_cast<int>(counts.size());
  m.weights = weights;
  m.p = p;
  for (std::size_t i = 0; i < train.rows.size(); ++i) {
    if (train.labels[i] < 0) continue;
    m.rows.push_back(train.rows[i]);
    m.labels.push_back(train.labels[i]);
  }
  return m;
}

double wnd5_distance(const std::vector<double>& z, const WndModel& model, int category) {
  if (category < 0 || category >= model.n_categories)
    throw Error(Errc::UnknownCategory, "wnd5_distance: category " + std::to_string(category));
  if (z.size() != model.weights.size())
    throw Error(Errc::DimensionMismatch, "wnd5_distance: vector has " + std::to_string(z.size()) +
                                             " features, model has " + std::to_string(model.weights.size()));
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < model.rows.size(); ++t) {
    if (model.labels[t] != category) continue;
    const auto& row = model.rows[t];
    double dist = 0.0;
    for (std::size_t f = 0; f < z.size(); ++f) {
      const double d = z[f] - row[f];
      dist += model.weights[f] * d * d;
    }
    sum += std::pow(std::max(dist, kWndEpsilon), model.p);
    ++n;
  }
  if (n == 0) throw Error(Errc::UnknownCategory, "wnd5_distance: category " + std::to_string(category) + " has no rows");
  return sum / static_cast<double>(n);
}

int wnd5_classify(const std::vector<double>& z, const WndModel& model) {
  int best = 0;
  double best_d = wnd5_distance(z, model, 0);
  for (int c = 1; c < model.n_categories; ++c) {
    const double d = wnd5_distance(z, model, c);
    const bool better = model.rule == WndRule::Argmax ? d > best_d : d < best_d;
    if (better) {
      best = c;
      best_d = d;
    }
  }
  return best;
}

}  // namespace palyno::classify
