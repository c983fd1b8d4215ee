#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>

#include <fftw3.h>

#include "palyno/error.hpp"
#include "palyno/features.hpp"

namespace palyno::features {

namespace {

// FFTW's planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

void require_min_size(const Image& img, int min_side, const char* what) {
  if (img.width() < min_side || img.height() < min_side)
    throw Error(Errc::ImageTooSmall, std::string(what) + ": image must be at least " + std::to_string(min_side) +
                                         "x" + std::to_string(min_side));
}

Image rescale_unit(const RealField& f) {
  Image out(f.width(), f.height(), 0.0);
  if (f.empty()) return out;
  const auto [lo, hi] = std::minmax_element(f.values().begin(), f.values().end());
  const double a = *lo, span = *hi - *lo;
  if (span <= 0.0) return out;
  for (std::size_t i = 0; i < f.values().size(); ++i) out.values()[i] = (f.values()[i] - a) / span;
  return out;
}

// Linear interpolation of a sampled line at Chebyshev nodes on [-1, 1].
std::vector<double> sample_at_nodes(const double* line, std::ptrdiff_t stride, int n, int nodes) {
  std::vector<double> out(nodes);
  for (int k = 0; k < nodes; ++k) {
    const double t = std::cos(std::numbers::pi * (k + 0.5) / nodes);
    const double pos = (t + 1.0) * 0.5 * (n - 1);
    const int i0 = std::clamp(static_cast<int>(std::floor(pos)), 0, n - 1);
    const int i1 = std::min(i0 + 1, n - 1);
    const double f = pos - i0;
    out[k] = (1.0 - f) * line[i0 * stride] + f * line[i1 * stride];
  }
  return out;
}

// Projects node samples onto T_0..T_{order-1}.
std::vector<double> chebyshev_project(const std::vector<double>& samples, int order) {
  const int m = static_cast<int>(samples.size());
  std::vector<double> c(order, 0.0);
  for (int i = 0; i < order; ++i) {
    double s = 0.0;
    for (int k = 0; k < m; ++k) s += samples[k] * std::cos(i * std::numbers::pi * (k + 0.5) / m);
    c[i] = (i == 0 ? 1.0 : 2.0) * s / m;
  }
  return c;
}

}  // namespace

std::string_view to_string(TransformPlane plane) noexcept {
  switch (plane) {
    case TransformPlane::Raw: return "raw";
    case TransformPlane::FourierMagnitude: return "fourier";
    case TransformPlane::Chebyshev: return "chebyshev";
    case TransformPlane::WaveletLL: return "wavelet";
    case TransformPlane::FourierOfWavelet: return "fourier_wavelet";
    case TransformPlane::ChebyshevOfFourier: return "chebyshev_fourier";
  }
  return "unknown";
}

RealField fourier_log_magnitude(const Image& img) {
  const int w = img.width(), h = img.height();
  if (w == 0 || h == 0) throw Error(Errc::ImageTooSmall, "fourier: empty image");
  const std::size_t n = static_cast<std::size_t>(w) * h;
  auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_2d(h, w, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  for (std::size_t i = 0; i < n; ++i) {
    buf[i][0] = img.values()[i];
    buf[i][1] = 0.0;
  }
  fftw_execute(plan);
  RealField out(w, h, 0.0);
  for (int y = 0; y < h; ++y) {
    const int sy = (y - h / 2 + h) % h;
    for (int x = 0; x < w; ++x) {
      const int sx = (x - w / 2 + w) % w;
      const auto& c = buf[static_cast<std::size_t>(sy) * w + sx];
      out(x, y) = std::log1p(std::hypot(c[0], c[1]));
    }
  }
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(buf);
  return out;
}

RealField chebyshev_coefficients(const Image& img, int order) {
  const int w = img.width(), h = img.height();
  if (w == 0 || h == 0) throw Error(Errc::ImageTooSmall, "chebyshev: empty image");
  if (order < 1) throw Error(Errc::InvalidArgument, "chebyshev: order must be >= 1");
  const int mx = std::max(order, w), my = std::max(order, h);

  // Along x: each row -> order coefficients.
  Grid<double> rows(order, h, 0.0);
  for (int y = 0; y < h; ++y) {
    const auto c = chebyshev_project(sample_at_nodes(&img(0, y), 1, w, mx), order);
    for (int i = 0; i < order; ++i) rows(i, y) = c[i];
  }
  // Along y for each x-order.
  RealField out(order, order, 0.0);
  for (int i = 0; i < order; ++i) {
    const auto c = chebyshev_project(sample_at_nodes(&rows(i, 0), order, h, my), order);
    for (int j = 0; j < order; ++j) out(i, j) = c[j];
  }
  return out;
}

Image haar_approximation(const Image& img) {
  const int w = img.width() / 2, h = img.height() / 2;
  Image out(w, h, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      out(x, y) = 0.25 * (img(2 * x, 2 * y) + img(2 * x + 1, 2 * y) + img(2 * x, 2 * y + 1) + img(2 * x + 1, 2 * y + 1));
  return out;
}

Image transform_image(const Image& img, TransformPlane plane) {
  require_min_size(img, 8, "transform_image");
  switch (plane) {
    case TransformPlane::Raw: return img;
    case TransformPlane::FourierMagnitude: return rescale_unit(fourier_log_magnitude(img));
    case TransformPlane::Chebyshev: return rescale_unit(chebyshev_coefficients(img));
    case TransformPlane::WaveletLL: return rescale_unit(haar_approximation(img));
    case TransformPlane::FourierOfWavelet:
      return transform_image(transform_image(img, TransformPlane::WaveletLL), TransformPlane::FourierMagnitude);
    case TransformPlane::ChebyshevOfFourier:
      return transform_image(transform_image(img, TransformPlane::FourierMagnitude), TransformPlane::Chebyshev);
  }
  throw Error(Errc::InvalidArgument, "transform_image: unknown plane");
}

}  // namespace palyno::features
