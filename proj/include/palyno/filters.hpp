#pragma once

#include "palyno/image.hpp"

namespace palyno {

/// Separable Gaussian blur with mirrored borders. sigma <= 0 returns the input.
RealField gaussian_blur(const RealField& img, double sigma);

/// (2r+1)x(2r+1) mean filter with mirrored borders.
RealField box_blur(const RealField& img, int radius);

/// Central differences in the interior, one-sided at the border.
struct Gradient {
  RealField dx;
  RealField dy;
};
Gradient central_gradient(const RealField& img);

/// 3x3 Sobel responses with replicated borders.
Gradient sobel(const RealField& img);

/// Mirror an out-of-range index back into [0, n).
int reflect_index(int i, int n) noexcept;

}  // namespace palyno
