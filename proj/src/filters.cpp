#include "palyno/filters.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace palyno {

int reflect_index(int i, int n) noexcept {
  if (n == 1) return 0;
  const int period = 2 * n - 2;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

namespace {

RealField convolve_rows(const RealField& img, const std::vector<double>& kernel) {
  const int r = static_cast<int>(kernel.size() / 2);
  RealField out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      double acc = 0.0;
      for (int k = -r; k <= r; ++k) acc += kernel[k + r] * img(reflect_index(x + k, img.width()), y);
      out(x, y) = acc;
    }
  }
  return out;
}

RealField convolve_cols(const RealField& img, const std::vector<double>& kernel) {
  const int r = static_cast<int>(kernel.size() / 2);
  RealField out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      double acc = 0.0;
      for (int k = -r; k <= r; ++k) acc += kernel[k + r] * img(x, reflect_index(y + k, img.height()));
      out(x, y) = acc;
    }
  }
  return out;
}

}  // namespace

RealField gaussian_blur(const RealField& img, double sigma) {
  if (sigma <= 0.0 || img.empty()) return img;
  const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * r + 1);
  double sum = 0.0;
  for (int k = -r; k <= r; ++k) {
    kernel[k + r] = std::exp(-0.5 * k * k / (sigma * sigma));
    sum += kernel[k + r];
  }
  for (double& k : kernel) k /= sum;
  return convolve_cols(convolve_rows(img, kernel), kernel);
}

RealField box_blur(const RealField& img, int radius) {
  if (radius <= 0 || img.empty()) return img;
  const std::vector<double> kernel(2 * radius + 1, 1.0 / (2 * radius + 1));
  return convolve_cols(convolve_rows(img, kernel), kernel);
}

Gradient central_gradient(const RealField& img) {
  const int w = img.width();
  const int h = img.height();
  Gradient g{RealField(w, h), RealField(w, h)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (w > 1) {
        if (x == 0) g.dx(x, y) = img(1, y) - img(0, y);
        else if (x == w - 1) g.dx(x, y) = img(x, y) - img(x - 1, y);
        else g.dx(x, y) = 0.5 * (img(x + 1, y) - img(x - 1, y));
      }
      if (h > 1) {
        if (y == 0) g.dy(x, y) = img(x, 1) - img(x, 0);
        else if (y == h - 1) g.dy(x, y) = img(x, y) - img(x, y - 1);
        else g.dy(x, y) = 0.5 * (img(x, y + 1) - img(x, y - 1));
      }
    }
  }
  return g;
}

Gradient sobel(const RealField& img) {
  const int w = img.width();
  const int h = img.height();
  Gradient g{RealField(w, h), RealField(w, h)};
  auto at = [&](int x, int y) {
    return img(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1));
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      g.dx(x, y) = (at(x + 1, y - 1) + 2 * at(x + 1, y) + at(x + 1, y + 1)) -
                   (at(x - 1, y - 1) + 2 * at(x - 1, y) + at(x - 1, y + 1));
      g.dy(x, y) = (at(x - 1, y + 1) + 2 * at(x, y + 1) + at(x + 1, y + 1)) -
                   (at(x - 1, y - 1) + 2 * at(x, y - 1) + at(x + 1, y - 1));
    }
  }
  return g;
}

}  // namespace palyno
