#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

#include "palyno/error.hpp"
#include "palyno/features.hpp"
#include "palyno/filters.hpp"

namespace palyno::features {

namespace {

constexpr double kZeroVariance = 1e-24;

struct Moments {
  double mean = 0.0;
  double var = 0.0;
  double m3 = 0.0;
  double m4 = 0.0;
};

Moments central_moments(const std::vector<double>& v) {
  Moments m;
  if (v.empty()) return m;
  const double n = static_cast<double>(v.size());
  m.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  for (double x : v) {
    const double d = x - m.mean, d2 = d * d;
    m.var += d2;
    m.m3 += d2 * d;
    m.m4 += d2 * d2;
  }
  m.var /= n;
  m.m3 /= n;
  m.m4 /= n;
  return m;
}

double entropy(const std::vector<double>& p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

int quantize(double v, int levels) {
  return std::clamp(static_cast<int>(std::floor(v * levels)), 0, levels - 1);
}

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

// Summed-area table with one row/column of zero padding.
class Integral {
 public:
  explicit Integral(const Image& img) : w_(img.width()), h_(img.height()), s_((w_ + 1) * (h_ + 1), 0.0) {
    for (int y = 0; y < h_; ++y) {
      double row = 0.0;
      for (int x = 0; x < w_; ++x) {
        row += img(x, y);
        at(x + 1, y + 1) = at(x + 1, y) + row;
      }
    }
  }
  // Mean over [x0, x1) x [y0, y1) clipped to the image.
  double mean(int x0, int y0, int x1, int y1) const {
    x0 = std::clamp(x0, 0, w_);
    x1 = std::clamp(x1, 0, w_);
    y0 = std::clamp(y0, 0, h_);
    y1 = std::clamp(y1, 0, h_);
    const int area = (x1 - x0) * (y1 - y0);
    if (area <= 0) return 0.0;
    return (at(x1, y1) - at(x0, y1) - at(x1, y0) + at(x0, y0)) / area;
  }

 private:
  double& at(int x, int y) { return s_[static_cast<std::size_t>(y) * (w_ + 1) + x]; }
  double at(int x, int y) const { return s_[static_cast<std::size_t>(y) * (w_ + 1) + x]; }
  int w_, h_;
  std::vector<double> s_;
};

}  // namespace

std::array<double, 5> pixel_statistics(const Image& img, const BinaryMask* mask) {
  if (mask && (mask->width() != img.width() || mask->height() != img.height()))
    throw Error(Errc::DimensionMismatch, "pixel_statistics: mask size differs from image");
  std::vector<double> v;
  v.reserve(img.size());
  for (std::size_t i = 0; i < img.size(); ++i)
    if (!mask || mask->values()[i]) v.push_back(img.values()[i]);
  if (v.empty()) return {};

  const Moments m = central_moments(v);
  double stdev = 0.0, skew = 0.0, kurt = 0.0;
  if (m.var > kZeroVariance) {
    stdev = std::sqrt(m.var);
    skew = m.m3 / (m.var * stdev);
    kurt = m.m4 / (m.var * m.var) - 3.0;
  }
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double median = v[mid];
  if (v.size() % 2 == 0) median = 0.5 * (median + *std::max_element(v.begin(), v.begin() + mid));
  return {m.mean, stdev, skew, kurt, median};
}

std::array<double, 24> multiscale_histograms(const Image& img) {
  std::array<double, 24> out{};
  if (img.empty()) return out;
  std::size_t offset = 0;
  for (int bins : {3, 5, 7, 9}) {
    for (double v : img.values()) out[offset + quantize(v, bins)] += 1.0;
    for (int b = 0; b < bins; ++b) out[offset + b] /= static_cast<double>(img.size());
    offset += bins;
  }
  return out;
}

std::vector<double> glcm(const Image& img, int dx, int dy) {
  constexpr int L = kGlcmLevels;
  std::vector<double> p(L * L, 0.0);
  double total = 0.0;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const int nx = x + dx, ny = y + dy;
      if (!img.contains(nx, ny)) continue;
      const int a = quantize(img(x, y), L), b = quantize(img(nx, ny), L);
      p[a * L + b] += 1.0;
      p[b * L + a] += 1.0;
      total += 2.0;
    }
  }
  if (total > 0.0)
    for (double& v : p) v /= total;
  return p;
}

std::array<double, 13> haralick_statistics(const std::vector<double>& p) {
  constexpr int L = kGlcmLevels;
  if (p.size() != static_cast<std::size_t>(L * L))
    throw Error(Errc::DimensionMismatch, "haralick_statistics: expected a 32x32 matrix");

  std::vector<double> px(L, 0.0), py(L, 0.0), psum(2 * L - 1, 0.0), pdiff(L, 0.0);
  double asm_ = 0.0, contrast = 0.0, idm = 0.0, sum_ij = 0.0;
  for (int i = 0; i < L; ++i) {
    for (int j = 0; j < L; ++j) {
      const double v = p[i * L + j];
      px[i] += v;
      py[j] += v;
      psum[i + j] += v;
      pdiff[std::abs(i - j)] += v;
      asm_ += v * v;
      contrast += (i - j) * (i - j) * v;
      idm += v / (1.0 + (i - j) * (i - j));
      sum_ij += i * j * v;
    }
  }
  double mux = 0.0, muy = 0.0;
  for (int i = 0; i < L; ++i) {
    mux += i * px[i];
    muy += i * py[i];
  }
  double varx = 0.0, vary = 0.0;
  for (int i = 0; i < L; ++i) {
    varx += (i - mux) * (i - mux) * px[i];
    vary += (i - muy) * (i - muy) * py[i];
  }
  const double sx = std::sqrt(varx), sy = std::sqrt(vary);
  const double correlation = (sx * sy > 1e-12) ? (sum_ij - mux * muy) / (sx * sy) : 0.0;

  double sum_avg = 0.0;
  for (int k = 0; k < 2 * L - 1; ++k) sum_avg += k * psum[k];
  double sum_var = 0.0;
  for (int k = 0; k < 2 * L - 1; ++k) sum_var += (k - sum_avg) * (k - sum_avg) * psum[k];
  double diff_mean = 0.0;
  for (int k = 0; k < L; ++k) diff_mean += k * pdiff[k];
  double diff_var = 0.0;
  for (int k = 0; k < L; ++k) diff_var += (k - diff_mean) * (k - diff_mean) * pdiff[k];

  const double hxy = entropy(p);
  const double hx = entropy(px), hy = entropy(py);
  double hxy1 = 0.0, hxy2 = 0.0;
  for (int i = 0; i < L; ++i) {
    for (int j = 0; j < L; ++j) {
      const double q = px[i] * py[j];
      if (q <= 0.0) continue;
      hxy1 -= p[i * L + j] * std::log(q);
      hxy2 -= q * std::log(q);
    }
  }
  const double hmax = std::max(hx, hy);
  const double imc1 = hmax > 0.0 ? (hxy - hxy1) / hmax : 0.0;
  const double imc2 = std::sqrt(std::max(0.0, 1.0 - std::exp(-2.0 * (hxy2 - hxy))));

  return {asm_, contrast, correlation, varx,    idm,      sum_avg, sum_var,
          entropy(psum), hxy, diff_var, entropy(pdiff), imc1, imc2};
}

std::array<std::array<double, 13>, 4> haralick_directional(const Image& img) {
  static constexpr std::array<std::array<int, 2>, 4> kOffsets{{{1, 0}, {1, -1}, {0, -1}, {-1, -1}}};
  std::array<std::array<double, 13>, 4> out{};
  for (std::size_t d = 0; d < kOffsets.size(); ++d)
    out[d] = haralick_statistics(glcm(img, kOffsets[d][0], kOffsets[d][1]));
  return out;
}

std::array<double, 26> haralick_glcm(const Image& img) {
  const auto dir = haralick_directional(img);
  std::array<double, 26> out{};
  for (int s = 0; s < 13; ++s) {
    double lo = dir[0][s], hi = dir[0][s], sum = 0.0;
    for (const auto& d : dir) {
      lo = std::min(lo, d[s]);
      hi = std::max(hi, d[s]);
      sum += d[s];
    }
    out[s] = sum / 4.0;
    out[13 + s] = hi - lo;
  }
  return out;
}

std::array<double, 16> tamura_orientation_histogram(const Image& img) {
  constexpr double kThreshold = 12.0 / 255.0;
  std::array<double, 16> hist{};
  double count = 0.0;
  for (int y = 1; y + 1 < img.height(); ++y) {
    for (int x = 1; x + 1 < img.width(); ++x) {
      double gh = 0.0, gv = 0.0;
      for (int k = -1; k <= 1; ++k) {
        gh += img(x + 1, y + k) - img(x - 1, y + k);
        gv += img(x + k, y + 1) - img(x + k, y - 1);
      }
      if (0.5 * (std::abs(gh) + std::abs(gv)) < kThreshold) continue;
      double theta = std::atan2(gv, gh);
      if (theta < 0.0) theta += std::numbers::pi;
      if (theta >= std::numbers::pi) theta -= std::numbers::pi;
      const int bin = std::min(15, static_cast<int>(theta / std::numbers::pi * 16.0));
      hist[bin] += 1.0;
      count += 1.0;
    }
  }
  if (count > 0.0)
    for (double& h : hist) h /= count;
  return hist;
}

std::array<double, 3> tamura_features(const Image& img) {
  if (img.width() < 32 || img.height() < 32) throw Error(Errc::ImageTooSmall, "tamura: image must be at least 32x32");
  const int w = img.width(), h = img.height();

  // Coarseness: best window size 2^k per pixel.
  const Integral integral(img);
  std::vector<Grid<double>> avg;
  for (int k = 1; k <= 5; ++k) {
    const int half = 1 << (k - 1);
    Grid<double> a(w, h, 0.0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) a(x, y) = integral.mean(x - half, y - half, x + half, y + half);
    avg.push_back(std::move(a));
  }
  double coarseness = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double best = -1.0;
      int best_k = 1;
      for (int k = 1; k <= 5; ++k) {
        const int half = 1 << (k - 1);
        // larger windows only where both neighbourhoods fit inside the image
        if (k > 1 && (x < 2 * half || y < 2 * half || x + 2 * half > w || y + 2 * half > h)) break;
        const auto& a = avg[k - 1];
        const double eh = std::abs(a(std::min(x + half, w - 1), y) - a(std::max(x - half, 0), y));
        const double ev = std::abs(a(x, std::min(y + half, h - 1)) - a(x, std::max(y - half, 0)));
        const double e = std::max(eh, ev);
        if (e > best + 1e-12) {
          best = e;
          best_k = k;
        }
      }
      coarseness += static_cast<double>(1 << best_k);
    }
  }
  coarseness /= static_cast<double>(w) * h;

  const std::vector<double> values(img.values().begin(), img.values().end());
  const Moments m = central_moments(values);
  double contrast = 0.0;
  if (m.var > kZeroVariance) contrast = std::sqrt(m.var) / std::pow(m.m4 / (m.var * m.var), 0.25);

  // Directionality: 1 - normalized spread of the orientation histogram
  // around its peak (1 = one dominant direction).
  const auto hist = tamura_orientation_histogram(img);
  double directionality = 0.0;
  const double mass = std::accumulate(hist.begin(), hist.end(), 0.0);
  if (mass > 0.0) {
    const int peak = static_cast<int>(std::max_element(hist.begin(), hist.end()) - hist.begin());
    double spread = 0.0, uniform = 0.0;
    for (int b = 0; b < 16; ++b) {
      const int d = std::min(std::abs(b - peak), 16 - std::abs(b - peak));
      spread += d * d * hist[b];
      uniform += d * d / 16.0;
    }
    directionality = std::clamp(1.0 - spread / uniform, 0.0, 1.0);
  }
  return {coarseness, contrast, directionality};
}

std::array<double, 25> zernike_magnitudes(const Image& img) {
  std::array<double, 25> out{};
  const int w = img.width(), h = img.height();
  if (w == 0 || h == 0) return out;
  const double cx = 0.5 * (w - 1), cy = 0.5 * (h - 1);
  const double radius = 0.5 * std::min(w, h);

  struct Term {
    int n, m;
    std::vector<double> coef;  // coefficient of rho^(n-2s)
  };
  std::vector<Term> terms;
  for (int n = 0; n <= 8; ++n) {
    for (int m = n % 2; m <= n; m += 2) {
      Term t{n, m, {}};
      for (int s = 0; s <= (n - m) / 2; ++s) {
        const double sign = (s % 2) ? -1.0 : 1.0;
        t.coef.push_back(sign * factorial(n - s) /
                         (factorial(s) * factorial((n + m) / 2 - s) * factorial((n - m) / 2 - s)));
      }
      terms.push_back(std::move(t));
    }
  }

  // Each pixel is integrated on a sub-grid clipped to the unit disk (finer
  // where the pixel straddles the rim), so a constant image has near-zero
  // non-radial moments.
  std::vector<double> re(terms.size(), 0.0), im(terms.size(), 0.0);
  std::array<double, 9> rho_pow{};
  std::array<std::complex<double>, 9> phase{};
  const double half = 0.5 / radius;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double f = img(x, y);
      if (f == 0.0) continue;
      const double xc = (x - cx) / radius, yc = (y - cy) / radius;
      const double near = std::hypot(std::max(std::abs(xc) - half, 0.0), std::max(std::abs(yc) - half, 0.0));
      const double far = std::hypot(std::abs(xc) + half, std::abs(yc) + half);
      if (near >= 1.0) continue;
      const int sub = far <= 1.0 ? 2 : 24;
      const double step = 1.0 / sub;
      for (int sj = 0; sj < sub; ++sj) {
        for (int si = 0; si < sub; ++si) {
          const double xn = (x - 0.5 + (si + 0.5) * step - cx) / radius;
          const double yn = (y - 0.5 + (sj + 0.5) * step - cy) / radius;
          const double rho = std::hypot(xn, yn);
          if (rho > 1.0) continue;
          const std::complex<double> unit = rho > 0.0 ? std::complex<double>(xn, -yn) / rho : 1.0;
          rho_pow[0] = 1.0;
          phase[0] = 1.0;
          for (int k = 1; k <= 8; ++k) {
            rho_pow[k] = rho_pow[k - 1] * rho;
            phase[k] = phase[k - 1] * unit;
          }
          const double wgt = f * step * step;
          for (std::size_t t = 0; t < terms.size(); ++t) {
            double r = 0.0;
            for (std::size_t s = 0; s < terms[t].coef.size(); ++s) r += terms[t].coef[s] * rho_pow[terms[t].n - 2 * s];
            re[t] += wgt * r * phase[terms[t].m].real();
            im[t] += wgt * r * phase[terms[t].m].imag();
          }
        }
      }
    }
  }
  const double area = 1.0 / (radius * radius);
  for (std::size_t t = 0; t < terms.size(); ++t)
    out[t] = (terms[t].n + 1) / std::numbers::pi * area * std::hypot(re[t], im[t]);
  return out;
}

std::array<double, 32> chebyshev_coeff_histogram(const Image& img) {
  std::array<double, 32> hist{};
  const RealField c = chebyshev_coefficients(img);
  const auto [lo, hi] = std::minmax_element(c.values().begin(), c.values().end());
  const double span = *hi - *lo;
  for (double v : c.values()) {
    const int bin = span > 0.0 ? quantize((v - *lo) / span, 32) : 0;
    hist[bin] += 1.0;
  }
  for (double& v : hist) v /= static_cast<double>(c.size());
  return hist;
}

std::array<double, 8> edge_statistics(const Image& img) {
  if (img.width() < 3 || img.height() < 3) throw Error(Errc::ImageTooSmall, "edge_statistics: image must be at least 3x3");
  const Gradient g = sobel(img);
  const std::size_t n = img.size();
  std::vector<double> mag(n);
  for (std::size_t i = 0; i < n; ++i) mag[i] = std::hypot(g.dx.values()[i], g.dy.values()[i]);
  const double max_mag = *std::max_element(mag.begin(), mag.end());
  std::array<double, 8> out{};
  if (max_mag <= 0.0) return out;

  const Moments m = central_moments(mag);
  std::array<double, 4> bins{};
  double edges = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (mag[i] <= 0.1 * max_mag) continue;
    edges += 1.0;
    double theta = std::atan2(g.dy.values()[i], g.dx.values()[i]);
    if (theta < 0.0) theta += std::numbers::pi;
    const int bin = static_cast<int>(std::floor((theta + std::numbers::pi / 8.0) / (std::numbers::pi / 4.0))) % 4;
    bins[bin] += 1.0;
  }
  out[0] = edges / static_cast<double>(n);
  out[1] = m.mean;
  out[2] = std::sqrt(m.var);
  double homogeneity = 0.0;
  for (int b = 0; b < 4; ++b) {
    out[3 + b] = edges > 0.0 ? bins[b] / edges : 0.0;
    homogeneity = std::max(homogeneity, out[3 + b]);
  }
  out[7] = homogeneity;
  return out;
}

}  // namespace palyno::features
