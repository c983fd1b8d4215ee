#include <algorithm>
#include <array>
#include <cmath>
#include <set>

#include <Eigen/Dense>
#include <spdlog/spdlog.h>

#include "palyno/filters.hpp"
#include "palyno/segmentation.hpp"

namespace palyno::seg {

void SnakeParams::validate() const {
  if (subsample_stride < 1 || iterations < 1 || gvf_mu <= 0.0 || gvf_iterations < 0 || alpha < 0.0 ||
      beta < 0.0 || time_step <= 0.0 || edge_sigma < 0.0 || external_weight < 0.0 ||
      force_softening <= 0.0 || point_spacing <= 0.0 || resample_every < 1) {
    throw Error(Errc::InvalidArgument, "invalid snake parameters");
  }
}

VectorField gvf_field(const Image& img, const SnakeParams& p) {
  p.validate();
  const int w = img.width();
  const int h = img.height();
  const Gradient smooth = central_gradient(gaussian_blur(img, p.edge_sigma));
  RealField edge(w, h);
  double max_edge = 0.0;
  for (std::size_t i = 0; i < edge.size(); ++i) {
    const double gx = smooth.dx.values()[i], gy = smooth.dy.values()[i];
    edge.values()[i] = gx * gx + gy * gy;
    max_edge = std::max(max_edge, edge.values()[i]);
  }
  if (max_edge > 0.0) {
    for (double& v : edge.values()) v /= max_edge;
  }

  const Gradient fg = central_gradient(edge);
  RealField mag2(w, h);
  double max_mag2 = 0.0;
  for (std::size_t i = 0; i < mag2.size(); ++i) {
    mag2.values()[i] = fg.dx.values()[i] * fg.dx.values()[i] + fg.dy.values()[i] * fg.dy.values()[i];
    max_mag2 = std::max(max_mag2, mag2.values()[i]);
  }

  VectorField field{fg.dx, fg.dy};
  // Keeps every update a convex combination of neighbours and the edge-map
  // gradient, which bounds |v| by max|grad f|.
  const double dt = 0.9 / (4.0 * p.gvf_mu + max_mag2);
  RealField next_u(w, h), next_v(w, h);
  for (int iter = 0; iter < p.gvf_iterations; ++iter) {
    for (int y = 0; y < h; ++y) {
      const int ym = reflect_index(y - 1, h), yp = reflect_index(y + 1, h);
      for (int x = 0; x < w; ++x) {
        const int xm = reflect_index(x - 1, w), xp = reflect_index(x + 1, w);
        const double b = mag2(x, y);
        const double lap_u =
            field.u(xm, y) + field.u(xp, y) + field.u(x, ym) + field.u(x, yp) - 4.0 * field.u(x, y);
        const double lap_v =
            field.v(xm, y) + field.v(xp, y) + field.v(x, ym) + field.v(x, yp) - 4.0 * field.v(x, y);
        next_u(x, y) = field.u(x, y) + dt * (p.gvf_mu * lap_u - b * (field.u(x, y) - fg.dx(x, y)));
        next_v(x, y) = field.v(x, y) + dt * (p.gvf_mu * lap_v - b * (field.v(x, y) - fg.dy(x, y)));
      }
    }
    std::swap(field.u, next_u);
    std::swap(field.v, next_v);
  }
  return field;
}

Contour trace_boundary(const BinaryMask& mask) {
  // clockwise on screen (y grows downwards), starting west
  constexpr std::array<std::pair<int, int>, 8> kRing{
      {{-1, 0}, {-1, -1}, {0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}}};
  auto fg = [&](int x, int y) { return mask.contains(x, y) && mask(x, y) != 0; };

  int sx = -1, sy = -1;
  for (int y = 0; y < mask.height() && sx < 0; ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask(x, y)) {
        sx = x;
        sy = y;
        break;
      }
    }
  }
  Contour out;
  if (sx < 0) return out;
  out.points.push_back({static_cast<double>(sx), static_cast<double>(sy)});

  auto direction_of = [&](int dx, int dy) {
    for (int d = 0; d < 8; ++d) {
      if (kRing[d].first == dx && kRing[d].second == dy) return d;
    }
    return 0;
  };

  int cx = sx, cy = sy;
  int back = 0;  // west neighbour of the raster-first pixel is background
  int first_nx = -1, first_ny = -1;
  const std::size_t guard = 4 * mask.size() + 8;
  for (std::size_t step = 0; step < guard; ++step) {
    int found = -1;
    for (int k = 1; k <= 8; ++k) {
      const int d = (back + k) % 8;
      if (fg(cx + kRing[d].first, cy + kRing[d].second)) {
        found = d;
        break;
      }
    }
    if (found < 0) break;  // isolated pixel
    const int nx = cx + kRing[found].first, ny = cy + kRing[found].second;
    if (cx == sx && cy == sy) {
      if (first_nx < 0) {
        first_nx = nx;
        first_ny = ny;
      } else if (nx == first_nx && ny == first_ny) {
        break;
      }
    }
    // The neighbour examined just before `found` is background; express it
    // relative to the new centre.
    const int prev = (found + 7) % 8;
    const int bx = cx + kRing[prev].first, by = cy + kRing[prev].second;
    back = direction_of(bx - nx, by - ny);
    cx = nx;
    cy = ny;
    if (!(cx == sx && cy == sy)) out.points.push_back({static_cast<double>(cx), static_cast<double>(cy)});
  }
  return out;
}

Contour subsample_contour(const Contour& c, int stride) {
  if (c.points.size() < 3) throw Error(Errc::InvalidArgument, "contour needs at least 3 points");
  if (stride < 1) throw Error(Errc::InvalidArgument, "stride must be >= 1");
  const std::size_t n = c.points.size();
  Contour out;
  for (std::size_t i = 0; i < n; i += static_cast<std::size_t>(stride)) out.points.push_back(c.points[i]);
  constexpr std::size_t kMinPoints = 8;
  if (out.points.size() < kMinPoints && n > out.points.size()) {
    out.points.clear();
    const std::size_t keep = std::min(kMinPoints, n);
    for (std::size_t k = 0; k < keep; ++k) out.points.push_back(c.points[k * n / keep]);
  }
  return out;
}

Contour resample_contour(const Contour& c, double spacing) {
  const std::size_t n = c.points.size();
  if (n < 2) return c;
  std::vector<double> cumulative(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& a = c.points[i];
    const Point2& b = c.points[(i + 1) % n];
    cumulative[i + 1] = cumulative[i] + std::hypot(b.x - a.x, b.y - a.y);
  }
  const double length = cumulative[n];
  if (length <= 0.0) return c;
  const auto count = static_cast<std::size_t>(std::max(3.0, std::round(length / spacing)));
  Contour out;
  out.points.reserve(count);
  std::size_t seg = 0;
  for (std::size_t k = 0; k < count; ++k) {
    const double s = length * static_cast<double>(k) / static_cast<double>(count);
    while (seg + 1 < n && cumulative[seg + 1] <= s) ++seg;
    const double seg_len = cumulative[seg + 1] - cumulative[seg];
    const double t = seg_len > 0.0 ? (s - cumulative[seg]) / seg_len : 0.0;
    const Point2& a = c.points[seg];
    const Point2& b = c.points[(seg + 1) % n];
    out.points.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
  }
  return out;
}

namespace {

double bilinear(const RealField& f, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(f.width() - 1));
  y = std::clamp(y, 0.0, static_cast<double>(f.height() - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, f.width() - 1);
  const int y1 = std::min(y0 + 1, f.height() - 1);
  const double tx = x - x0, ty = y - y0;
  return (1 - ty) * ((1 - tx) * f(x0, y0) + tx * f(x1, y0)) + ty * ((1 - tx) * f(x0, y1) + tx * f(x1, y1));
}

double signed_area(const std::vector<Point2>& pts) {
  double a = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Point2& p = pts[i];
    const Point2& q = pts[(i + 1) % pts.size()];
    a += p.x * q.y - q.x * p.y;
  }
  return 0.5 * a;
}

Eigen::PartialPivLU<Eigen::MatrixXd> internal_energy_solver(std::size_t n, const SnakeParams& p) {
  const double a = p.beta;
  const double b = -p.alpha - 4.0 * p.beta;
  const double c = 2.0 * p.alpha + 6.0 * p.beta;
  const auto ni = static_cast<long>(n);
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(ni, ni) / p.time_step;
  for (long i = 0; i < ni; ++i) {
    m(i, i) += c;
    m(i, (i + 1) % ni) += b;
    m(i, (i + ni - 1) % ni) += b;
    m(i, (i + 2) % ni) += a;
    m(i, (i + ni - 2) % ni) += a;
  }
  return Eigen::PartialPivLU<Eigen::MatrixXd>(m);
}

std::size_t distinct_points(const std::vector<Point2>& pts) {
  std::set<std::pair<long, long>> seen;
  for (const Point2& q : pts) seen.emplace(std::lround(q.x * 1e3), std::lround(q.y * 1e3));
  return seen.size();
}

}  // namespace

Contour snake_refine(const Image& img, const Contour& init, const SnakeParams& p) {
  p.validate();
  if (init.points.size() < 3) throw Error(Errc::ContourCollapsed, "initial contour has fewer than 3 points");
  const double max_x = img.width() - 1.0;
  const double max_y = img.height() - 1.0;
  for (const Point2& q : init.points) {
    if (q.x < 0.0 || q.y < 0.0 || q.x > max_x || q.y > max_y) {
      throw Error(Errc::OutOfBounds, "initial contour leaves the image");
    }
  }

  const VectorField field = gvf_field(img, p);
  double max_force = 0.0;
  for (std::size_t i = 0; i < field.u.size(); ++i) {
    max_force = std::max(max_force, std::hypot(field.u.values()[i], field.v.values()[i]));
  }
  const double softening = p.force_softening * max_force;
  const double gamma = 1.0 / p.time_step;

  std::vector<Point2> pts = resample_contour(init, p.point_spacing).points;
  std::size_t solver_size = 0;
  Eigen::PartialPivLU<Eigen::MatrixXd> solver;
  for (int iter = 0; iter < p.iterations; ++iter) {
    if (iter > 0 && iter % p.resample_every == 0) {
      pts = resample_contour(Contour{pts}, p.point_spacing).points;
    }
    const std::size_t n = pts.size();
    if (n < 3 || distinct_points(pts) < 3) throw Error(Errc::ContourCollapsed, "snake collapsed");
    if (n != solver_size) {
      solver = internal_energy_solver(n, p);
      solver_size = n;
    }
    const double orientation = signed_area(pts) >= 0.0 ? 1.0 : -1.0;
    Eigen::VectorXd rx(static_cast<long>(n)), ry(static_cast<long>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const Point2& q = pts[i];
      double fx = bilinear(field.u, q.x, q.y);
      double fy = bilinear(field.v, q.x, q.y);
      if (softening > 0.0) {
        const double scale = 1.0 / std::sqrt(fx * fx + fy * fy + softening * softening);
        fx *= scale;
        fy *= scale;
      } else {
        fx = fy = 0.0;
      }
      const Point2& prev = pts[(i + n - 1) % n];
      const Point2& next = pts[(i + 1) % n];
      double nx = orientation * (next.y - prev.y);
      double ny = orientation * -(next.x - prev.x);
      const double nlen = std::hypot(nx, ny);
      if (nlen > 0.0) {
        nx /= nlen;
        ny /= nlen;
      }
      const auto k = static_cast<long>(i);
      rx(k) = gamma * q.x + p.external_weight * fx + p.balloon * nx;
      ry(k) = gamma * q.y + p.external_weight * fy + p.balloon * ny;
    }
    const Eigen::VectorXd xs = solver.solve(rx);
    const Eigen::VectorXd ys = solver.solve(ry);
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = static_cast<long>(i);
      pts[i].x = std::isfinite(xs(k)) ? std::clamp(xs(k), 0.0, max_x) : pts[i].x;
      pts[i].y = std::isfinite(ys(k)) ? std::clamp(ys(k), 0.0, max_y) : pts[i].y;
    }
  }
  if (distinct_points(pts) < 3) throw Error(Errc::ContourCollapsed, "snake collapsed");
  return Contour{std::move(pts)};
}

BinaryMask rasterize(const Contour& c, int width, int height) {
  BinaryMask out(width, height);
  const std::size_t n = c.points.size();
  if (n < 3) return out;
  std::vector<Point2> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = c.points[i];
  std::vector<double> crossings;
  for (int y = 0; y < height; ++y) {
    crossings.clear();
    const double yc = y;
    for (std::size_t i = 0; i < n; ++i) {
      const Point2& a = v[i];
      const Point2& b = v[(i + 1) % n];
      if ((a.y <= yc && yc < b.y) || (b.y <= yc && yc < a.y)) {
        crossings.push_back(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
      }
    }
    std::ranges::sort(crossings);
    for (std::size_t k = 0; k + 1 < crossings.size(); k += 2) {
      const int x0 = std::max(0, static_cast<int>(std::ceil(crossings[k])));
      const int x1 = std::min(width - 1, static_cast<int>(std::ceil(crossings[k + 1])) - 1);
      for (int x = x0; x <= x1; ++x) out(x, y) = 1;
    }
  }
  return out;
}

CoarseResult coarse_stage(const Image& img, const CoarseParams& cp) {
  cp.validate();
  CoarseResult result;
  result.preprocessed = preprocess(img, cp);
  try {
    result.mask = kmeans_binary(result.preprocessed);
  } catch (const Error& e) {
    if (e.code() != Errc::DegenerateClustering) throw;
    result.mask = BinaryMask(img.width(), img.height());
    return result;
  }
  result.mask = morph_open_close(fill_holes(result.mask), cp.struct_radius);
  result.components = extract_components(result.mask, cp);
  return result;
}

namespace {

BoundingBox expand(const BoundingBox& b, int mx, int my, int w, int h) {
  BoundingBox out;
  out.x = std::max(0, b.x - mx);
  out.y = std::max(0, b.y - my);
  out.w = std::min(w, b.x + b.w + mx) - out.x;
  out.h = std::min(h, b.y + b.h + my) - out.y;
  return out;
}

GrainRecord refine_component(const Image& img, const Component& comp,
                             const SnakeParams& sp, const std::string& source_id) {
  constexpr int kSnakePad = 6;
  const BoundingBox roi = expand(comp.box, kSnakePad, kSnakePad, img.width(), img.height());
  BinaryMask roi_mask(roi.w, roi.h);
  for (int y = 0; y < comp.box.h; ++y) {
    for (int x = 0; x < comp.box.w; ++x) {
      roi_mask(comp.box.x - roi.x + x, comp.box.y - roi.y + y) = comp.mask(x, y);
    }
  }
  const Contour init = subsample_contour(trace_boundary(roi_mask), sp.subsample_stride);
  const Contour refined = snake_refine(crop(img, roi), init, sp);
  const BinaryMask refined_mask = fill_holes(largest_component(rasterize(refined, roi.w, roi.h)));
  if (mask_area(refined_mask) == 0) throw Error(Errc::ContourCollapsed, "refined mask is empty");

  int x0 = roi.w, y0 = roi.h, x1 = -1, y1 = -1;
  for (int y = 0; y < roi.h; ++y) {
    for (int x = 0; x < roi.w; ++x) {
      if (!refined_mask(x, y)) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
    }
  }
  const BoundingBox tight{roi.x + x0, roi.y + y0, x1 - x0 + 1, y1 - y0 + 1};
  const BoundingBox box = expand(tight, static_cast<int>(std::ceil(0.1 * tight.w)),
                                 static_cast<int>(std::ceil(0.1 * tight.h)), img.width(), img.height());
  GrainRecord rec;
  rec.source_id = source_id;
  rec.box = box;
  rec.image = crop(img, box);
  rec.mask = BinaryMask(box.w, box.h);
  rec.masked_image = Image(box.w, box.h);
  for (int y = 0; y < box.h; ++y) {
    for (int x = 0; x < box.w; ++x) {
      const int rx = box.x + x - roi.x, ry = box.y + y - roi.y;
      const bool on = refined_mask.contains(rx, ry) && refined_mask(rx, ry);
      rec.mask(x, y) = on ? 1 : 0;
      rec.masked_image(x, y) = on ? rec.image(x, y) : 0.0;
    }
  }
  return rec;
}

}  // namespace

std::vector<GrainRecord> segment_grains(const Image& img, const CoarseParams& cp, const SnakeParams& sp,
                                        const std::string& source_id) {
  sp.validate();
  const CoarseResult coarse = coarse_stage(img, cp);
  std::vector<GrainRecord> grains;
  for (std::size_t k = 0; k < coarse.components.size(); ++k) {
    try {
      grains.push_back(refine_component(img, coarse.components[k], sp, source_id));
    } catch (const Error& e) {
      spdlog::warn("segment {}: grain {} skipped: {}", source_id, k, e.what());
    }
  }
  return grains;
}

}  // namespace palyno::seg
