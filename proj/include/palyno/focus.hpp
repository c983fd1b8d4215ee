#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "palyno/image.hpp"

namespace palyno::focus {

enum class MeasureKind { AbsoluteGradient, VollathF4, Variance, HistogramEntropy };

std::string_view to_string(MeasureKind kind) noexcept;
std::optional<MeasureKind> parse_measure(std::string_view name) noexcept;

struct FocusCurve {
  std::vector<double> scores;
  std::size_t best_index = 0;
};

/// Mean over pixels of |I(x+1,y)-I(x,y)| + |I(x,y+1)-I(x,y)|; differences
/// that would leave the image are dropped. Needs at least 2x2.
double absolute_gradient_score(const Image& img);

/// Vollath F4 autocorrelation along x, both lag sums taken over the same
/// column range so that a uniform image scores 0. Needs width >= 3.
double vollath_f4_score(const Image& img);

/// Population variance of intensities.
double variance_score(const Image& img);

/// Shannon entropy (bits) of a 256-bin intensity histogram.
double histogram_entropy_score(const Image& img);

double score(const Image& img, MeasureKind kind);

/// Scores each plane; best_index is the argmax, lowest index on ties.
FocusCurve select_optimal_plane(const FocalStack& stack, MeasureKind kind);

}  // namespace palyno::focus
