#include "palyno/focus.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace palyno::focus {

std::string_view to_string(MeasureKind kind) noexcept {
  switch (kind) {
    case MeasureKind::AbsoluteGradient: return "absolute_gradient";
    case MeasureKind::VollathF4: return "vollath_f4";
    case MeasureKind::Variance: return "variance";
    case MeasureKind::HistogramEntropy: return "histogram_entropy";
  }
  return "unknown";
}

std::optional<MeasureKind> parse_measure(std::string_view name) noexcept {
  for (auto kind : {MeasureKind::AbsoluteGradient, MeasureKind::VollathF4, MeasureKind::Variance,
                    MeasureKind::HistogramEntropy}) {
    if (name == to_string(kind)) return kind;
  }
  return std::nullopt;
}

double absolute_gradient_score(const Image& img) {
  if (img.width() < 2 || img.height() < 2) {
    throw Error(Errc::ImageTooSmall, "absolute gradient needs at least 2x2 pixels");
  }
  double sum = 0.0;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (x + 1 < img.width()) sum += std::abs(img(x + 1, y) - img(x, y));
      if (y + 1 < img.height()) sum += std::abs(img(x, y + 1) - img(x, y));
    }
  }
  return sum / static_cast<double>(img.size());
}

double vollath_f4_score(const Image& img) {
  if (img.width() < 3 || img.height() < 1) {
    throw Error(Errc::ImageTooSmall, "Vollath F4 needs width >= 3");
  }
  double lag1 = 0.0;
  double lag2 = 0.0;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x + 2 < img.width(); ++x) {
      lag1 += img(x, y) * img(x + 1, y);
      lag2 += img(x, y) * img(x + 2, y);
    }
  }
  return (lag1 - lag2) / static_cast<double>(img.size());
}

double variance_score(const Image& img) {
  if (img.empty()) throw Error(Errc::ImageTooSmall, "variance of an empty image");
  double mean = 0.0;
  for (double v : img.values()) mean += v;
  mean /= static_cast<double>(img.size());
  double var = 0.0;
  for (double v : img.values()) var += (v - mean) * (v - mean);
  return var / static_cast<double>(img.size());
}

double histogram_entropy_score(const Image& img) {
  if (img.empty()) throw Error(Errc::ImageTooSmall, "entropy of an empty image");
  std::array<std::size_t, 256> hist{};
  for (double v : img.values()) {
    ++hist[std::clamp(static_cast<int>(v * 256.0), 0, 255)];
  }
  double entropy = 0.0;
  const double n = static_cast<double>(img.size());
  for (std::size_t count : hist) {
    if (count == 0) continue;
    const double p = static_cast<double>(count) / n;
    entropy -= p * std::log2(p);
  }
  return entropy;
}

double score(const Image& img, MeasureKind kind) {
  switch (kind) {
    case MeasureKind::AbsoluteGradient: return absolute_gradient_score(img);
    case MeasureKind::VollathF4: return vollath_f4_score(img);
    case MeasureKind::Variance: return variance_score(img);
    case MeasureKind::HistogramEntropy: return histogram_entropy_score(img);
  }
  return 0.0;
}

FocusCurve select_optimal_plane(const FocalStack& stack, MeasureKind kind) {
  if (stack.planes.empty()) throw Error(Errc::EmptyStack, "focal stack has no planes");
  FocusCurve curve;
  curve.scores.reserve(stack.planes.size());
  for (const Image& plane : stack.planes) curve.scores.push_back(score(plane, kind));
  // max_element returns the first maximum, which is the lowest-index tie-break
  curve.best_index = static_cast<std::size_t>(
      std::distance(curve.scores.begin(), std::ranges::max_element(curve.scores)));
  return curve;
}

}  // namespace palyno::focus
