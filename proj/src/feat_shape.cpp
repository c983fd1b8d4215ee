#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "palyno/error.hpp"
#include "palyno/features.hpp"

namespace palyno::features {

namespace {

struct P {
  double x, y;
  bool operator<(const P& o) const { return x < o.x || (x == o.x && y < o.y); }
  bool operator==(const P& o) const = default;
};

double cross(const P& o, const P& a, const P& b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

// Andrew's monotone chain; returns the hull area.
double convex_hull_area(std::vector<P> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return 0.0;
  std::vector<P> hull(2 * pts.size());
  std::size_t k = 0;
  for (const P& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  double area = 0.0;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const P& a = hull[i];
    const P& b = hull[(i + 1) % hull.size()];
    area += a.x * b.y - b.x * a.y;
  }
  return std::abs(area) / 2.0;
}

// Integral of (u + s)^p over s in [-1/2, 1/2]: moments of a unit pixel square.
double pixel_moment(double u, int p) {
  switch (p) {
    case 0: return 1.0;
    case 1: return u;
    case 2: return u * u + 1.0 / 12.0;
    default: return u * u * u + u / 4.0;
  }
}

std::vector<double> centroid_distance_signature(const seg::Contour& boundary, double cx, double cy, int samples) {
  const auto& pts = boundary.points;
  const std::size_t n = pts.size();
  std::vector<double> cum(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = pts[i];
    const auto& b = pts[(i + 1) % n];
    cum[i + 1] = cum[i] + std::hypot(b.x - a.x, b.y - a.y);
  }
  std::vector<double> r(samples, 0.0);
  const double total = cum[n];
  std::size_t seg = 0;
  for (int k = 0; k < samples; ++k) {
    double x = pts[0].x, y = pts[0].y;
    if (total > 0.0) {
      const double s = total * k / samples;
      while (seg + 1 < n && cum[seg + 1] <= s) ++seg;
      const auto& a = pts[seg];
      const auto& b = pts[(seg + 1) % n];
      const double len = cum[seg + 1] - cum[seg];
      const double f = len > 0.0 ? (s - cum[seg]) / len : 0.0;
      x = a.x + f * (b.x - a.x);
      y = a.y + f * (b.y - a.y);
    }
    r[k] = std::hypot(x - cx, y - cy);
  }
  return r;
}

}  // namespace

std::array<double, 25> shape_features(const BinaryMask& mask) {
  Grid<int> labels;
  const int count = seg::label_components(mask, labels);
  if (count == 0) throw Error(Errc::EmptyMask, "shape_features: mask has no foreground");
  if (count > 1) throw Error(Errc::MultipleComponents, "shape_features: mask has " + std::to_string(count) + " components");

  const int w = mask.width(), h = mask.height();
  double area = 0.0, sx = 0.0, sy = 0.0;
  int x0 = w, x1 = -1, y0 = h, y1 = -1;
  std::vector<P> corners;
  for (int y = 0; y < h; ++y) {
    int first = -1, last = -1;
    for (int x = 0; x < w; ++x) {
      if (!mask(x, y)) continue;
      area += 1.0;
      sx += x;
      sy += y;
      if (first < 0) first = x;
      last = x;
    }
    if (first < 0) continue;
    x0 = std::min(x0, first);
    x1 = std::max(x1, last);
    y0 = std::min(y0, y);
    y1 = std::max(y1, y);
    for (double dy : {-0.5, 0.5}) {
      corners.push_back({first - 0.5, y + dy});
      corners.push_back({last + 0.5, y + dy});
    }
  }
  const double cx = sx / area, cy = sy / area;

  // Central moments up to order 3, integrated exactly over pixel squares.
  double mu[4][4] = {};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask(x, y)) continue;
      const double u = x - cx, v = y - cy;
      double iu[4], iv[4];
      for (int p = 0; p < 4; ++p) {
        iu[p] = pixel_moment(u, p);
        iv[p] = pixel_moment(v, p);
      }
      for (int p = 0; p < 4; ++p)
        for (int q = 0; p + q <= 3; ++q) mu[p][q] += iu[p] * iv[q];
    }
  }

  const double a = mu[2][0] / area, b = mu[1][1] / area, c = mu[0][2] / area;
  const double root = std::sqrt((a - c) * (a - c) + 4.0 * b * b);
  const double l1 = 0.5 * (a + c + root), l2 = std::max(0.0, 0.5 * (a + c - root));
  const double major = 4.0 * std::sqrt(l1), minor = 4.0 * std::sqrt(l2);
  const double eccentricity = l1 > 0.0 ? std::sqrt(std::max(0.0, 1.0 - l2 / l1)) : 0.0;
  const double orientation =
      root <= 1e-9 * std::max(l1, 1e-300) ? 0.0 : -0.5 * std::atan2(2.0 * b, a - c) * 180.0 / std::numbers::pi;

  const double convex_area = std::max(convex_hull_area(std::move(corners)), area);
  const double extent = area / (static_cast<double>(x1 - x0 + 1) * (y1 - y0 + 1));

  const seg::Contour boundary = seg::trace_boundary(mask);
  double perimeter = 0.0;
  const auto& bp = boundary.points;
  if (bp.size() > 1)
    for (std::size_t i = 0; i < bp.size(); ++i) {
      const auto& p = bp[i];
      const auto& q = bp[(i + 1) % bp.size()];
      perimeter += std::hypot(q.x - p.x, q.y - p.y);
    }
  const double circularity = perimeter > 0.0 ? 4.0 * std::numbers::pi * area / (perimeter * perimeter) : 0.0;

  auto eta = [&](int p, int q) { return mu[p][q] / std::pow(area, 1.0 + (p + q) / 2.0); };
  const double n20 = eta(2, 0), n02 = eta(0, 2), n11 = eta(1, 1);
  const double n30 = eta(3, 0), n03 = eta(0, 3), n21 = eta(2, 1), n12 = eta(1, 2);
  const double s1 = n30 + n12, s2 = n21 + n03, d1 = n30 - 3 * n12, d2 = 3 * n21 - n03;
  const double hu1 = n20 + n02;
  const double hu2 = (n20 - n02) * (n20 - n02) + 4 * n11 * n11;
  const double hu3 = d1 * d1 + d2 * d2;
  const double hu4 = s1 * s1 + s2 * s2;
  const double hu5 = d1 * s1 * (s1 * s1 - 3 * s2 * s2) + d2 * s2 * (3 * s1 * s1 - s2 * s2);
  const double hu6 = (n20 - n02) * (s1 * s1 - s2 * s2) + 4 * n11 * s1 * s2;
  const double hu7 = d2 * s1 * (s1 * s1 - 3 * s2 * s2) - d1 * s2 * (3 * s1 * s1 - s2 * s2);

  std::array<double, 6> fd{};
  if (bp.size() >= 3) {
    const auto r = centroid_distance_signature(boundary, cx, cy, 64);
    std::array<double, 7> mag{};
    for (int k = 0; k <= 6; ++k) {
      std::complex<double> s = 0.0;
      for (std::size_t i = 0; i < r.size(); ++i)
        s += r[i] * std::polar(1.0, -2.0 * std::numbers::pi * k * static_cast<double>(i) / r.size());
      mag[k] = std::abs(s);
    }
    if (mag[0] > 0.0)
      for (int k = 1; k <= 6; ++k) fd[k - 1] = mag[k] / mag[0];
  }

  return {area,        perimeter, std::sqrt(4.0 * area / std::numbers::pi),
          major,       minor,     eccentricity,
          orientation, area / convex_area, extent,
          convex_area, circularity, minor > 0.0 ? major / minor : 0.0,
          hu1,         hu2,       hu3,
          hu4,         hu5,       hu6,
          hu7,         fd[0],     fd[1],
          fd[2],       fd[3],     fd[4],
          fd[5]};
}

}  // namespace palyno::features
