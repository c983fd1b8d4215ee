#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <vector>

#include "palyno/filters.hpp"
#include "palyno/segmentation.hpp"

namespace palyno::seg {

void CoarseParams::validate() const {
  if (clahe_tiles < 1 || clahe_clip <= 0.0 || clahe_clip > 1.0 || median_radius < 1 ||
      struct_radius < 1 || min_area < 1 || max_area < 0 ||
      (max_area > 0 && min_area >= max_area) || border_interior_fraction < 0.0 ||
      border_interior_fraction > 1.0) {
    throw Error(Errc::InvalidArgument, "invalid coarse segmentation parameters");
  }
}

int CoarseParams::resolved_max_area(int image_area) const {
  return max_area > 0 ? max_area : static_cast<int>(0.4 * image_area);
}

namespace {

constexpr int kBins = 256;

int intensity_bin(double v) { return std::clamp(static_cast<int>(v * kBins), 0, kBins - 1); }

// Tile t covers [t*n/tiles, (t+1)*n/tiles).
int tile_start(int t, int n, int tiles) { return static_cast<int>(static_cast<long>(t) * n / tiles); }

double tile_center(int t, int n, int tiles) {
  return 0.5 * (tile_start(t, n, tiles) + tile_start(t + 1, n, tiles) - 1);
}

// Locates the pair of tile centres bracketing coordinate c and the weight of
// the second one.
void bracket(double c, int n, int tiles, int& t0, int& t1, double& weight) {
  t0 = 0;
  while (t0 + 1 < tiles && tile_center(t0 + 1, n, tiles) <= c) ++t0;
  t1 = std::min(t0 + 1, tiles - 1);
  const double c0 = tile_center(t0, n, tiles);
  const double c1 = tile_center(t1, n, tiles);
  weight = t1 == t0 ? 0.0 : std::clamp((c - c0) / (c1 - c0), 0.0, 1.0);
}

}  // namespace

Image clahe(const Image& img, int tiles, double clip) {
  const int w = img.width();
  const int h = img.height();
  if (tiles < 1 || w < 2 * tiles || h < 2 * tiles) {
    throw Error(Errc::ImageTooSmall, "image smaller than the CLAHE tile grid");
  }
  std::vector<std::array<double, kBins>> maps(static_cast<std::size_t>(tiles) * tiles);
  for (int ty = 0; ty < tiles; ++ty) {
    for (int tx = 0; tx < tiles; ++tx) {
      std::array<double, kBins> hist{};
      const int x0 = tile_start(tx, w, tiles), x1 = tile_start(tx + 1, w, tiles);
      const int y0 = tile_start(ty, h, tiles), y1 = tile_start(ty + 1, h, tiles);
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) hist[intensity_bin(img(x, y))] += 1.0;
      }
      const double n = static_cast<double>((x1 - x0) * (y1 - y0));
      // normalized clip limit, as in the common [0,1] CLAHE parameterization
      const double min_clip = std::ceil(n / kBins);
      const double limit = min_clip + std::round(clip * (n - min_clip));
      double excess = 0.0;
      for (double& count : hist) {
        if (count > limit) {
          excess += count - limit;
          count = limit;
        }
      }
      const double share = excess / kBins;
      auto& map = maps[static_cast<std::size_t>(ty) * tiles + tx];
      double cdf = 0.0;
      for (int b = 0; b < kBins; ++b) {
        cdf += hist[b] + share;
        map[b] = std::clamp(cdf / n, 0.0, 1.0);
      }
    }
  }

  Image out(w, h);
  for (int y = 0; y < h; ++y) {
    int ty0, ty1;
    double wy;
    bracket(y, h, tiles, ty0, ty1, wy);
    for (int x = 0; x < w; ++x) {
      int tx0, tx1;
      double wx;
      bracket(x, w, tiles, tx0, tx1, wx);
      const int b = intensity_bin(img(x, y));
      auto m = [&](int tx, int ty) { return maps[static_cast<std::size_t>(ty) * tiles + tx][b]; };
      const double top = (1 - wx) * m(tx0, ty0) + wx * m(tx1, ty0);
      const double bottom = (1 - wx) * m(tx0, ty1) + wx * m(tx1, ty1);
      out(x, y) = std::clamp((1 - wy) * top + wy * bottom, 0.0, 1.0);
    }
  }
  return out;
}

Image median_filter(const Image& img, int radius) {
  if (radius <= 0) return img;
  Image out(img.width(), img.height());
  std::vector<double> window;
  window.reserve(static_cast<std::size_t>((2 * radius + 1) * (2 * radius + 1)));
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      window.clear();
      for (int dy = -radius; dy <= radius; ++dy) {
        const int yy = reflect_index(y + dy, img.height());
        for (int dx = -radius; dx <= radius; ++dx) {
          window.push_back(img(reflect_index(x + dx, img.width()), yy));
        }
      }
      auto mid = window.begin() + static_cast<std::ptrdiff_t>(window.size() / 2);
      std::nth_element(window.begin(), mid, window.end());
      out(x, y) = *mid;
    }
  }
  return out;
}

Image preprocess(const Image& img, const CoarseParams& p) {
  p.validate();
  return median_filter(clahe(img, p.clahe_tiles, p.clahe_clip), p.median_radius);
}

BinaryMask kmeans_binary(const Image& img) {
  if (img.empty()) throw Error(Errc::DegenerateClustering, "empty image");
  const auto [lo_it, hi_it] = std::ranges::minmax_element(img.values());
  double c0 = *lo_it;
  double c1 = *hi_it;
  if (c0 == c1) throw Error(Errc::DegenerateClustering, "all pixels have the same intensity");

  for (int iter = 0; iter < 100; ++iter) {
    double sum0 = 0.0, sum1 = 0.0;
    std::size_t n0 = 0, n1 = 0;
    for (double v : img.values()) {
      if (std::abs(v - c0) <= std::abs(v - c1)) {
        sum0 += v;
        ++n0;
      } else {
        sum1 += v;
        ++n1;
      }
    }
    const double next0 = n0 ? sum0 / n0 : c0;
    const double next1 = n1 ? sum1 / n1 : c1;
    const double shift = std::max(std::abs(next0 - c0), std::abs(next1 - c1));
    c0 = next0;
    c1 = next1;
    if (shift < 1e-6) break;
  }

  BinaryMask low(img.width(), img.height());
  std::size_t low_total = 0;
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double v = img.values()[i];
    low.values()[i] = std::abs(v - c0) <= std::abs(v - c1) ? 1 : 0;
    low_total += low.values()[i];
  }

  // Foreground is the cluster owning the minority of border pixels.
  std::size_t border_low = 0, border_total = 0;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (x != 0 && y != 0 && x != img.width() - 1 && y != img.height() - 1) continue;
      border_low += low(x, y);
      ++border_total;
    }
  }
  const std::size_t border_high = border_total - border_low;
  bool foreground_is_low;
  if (border_low != border_high) {
    foreground_is_low = border_low < border_high;
  } else {
    foreground_is_low = low_total * 2 <= img.size();
  }
  if (!foreground_is_low) {
    for (auto& v : low.values()) v = v ? 0 : 1;
  }
  return low;
}

BinaryMask fill_holes(const BinaryMask& mask) {
  const int w = mask.width();
  const int h = mask.height();
  Grid<std::uint8_t> reached(w, h, 0);
  std::deque<std::pair<int, int>> queue;
  auto seed = [&](int x, int y) {
    if (!mask(x, y) && !reached(x, y)) {
      reached(x, y) = 1;
      queue.emplace_back(x, y);
    }
  };
  for (int x = 0; x < w; ++x) {
    seed(x, 0);
    seed(x, h - 1);
  }
  for (int y = 0; y < h; ++y) {
    seed(0, y);
    seed(w - 1, y);
  }
  constexpr std::array<std::pair<int, int>, 4> kSteps{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
  while (!queue.empty()) {
    const auto [x, y] = queue.front();
    queue.pop_front();
    for (const auto& [dx, dy] : kSteps) {
      if (mask.contains(x + dx, y + dy)) seed(x + dx, y + dy);
    }
  }
  BinaryMask out(w, h);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    out.values()[i] = (mask.values()[i] || !reached.values()[i]) ? 1 : 0;
  }
  return out;
}

namespace {

std::vector<std::pair<int, int>> disk_offsets(int radius) {
  std::vector<std::pair<int, int>> offsets;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      if (dx * dx + dy * dy <= radius * radius) offsets.emplace_back(dx, dy);
    }
  }
  return offsets;
}

}  // namespace

// Out-of-image positions count as foreground for erosion and background for
// dilation, so opening never adds and closing never removes pixels.
BinaryMask erode(const BinaryMask& mask, int radius) {
  const auto offsets = disk_offsets(radius);
  BinaryMask out(mask.width(), mask.height());
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask(x, y)) continue;
      bool keep = true;
      for (const auto& [dx, dy] : offsets) {
        if (mask.contains(x + dx, y + dy) && !mask(x + dx, y + dy)) {
          keep = false;
          break;
        }
      }
      out(x, y) = keep ? 1 : 0;
    }
  }
  return out;
}

BinaryMask dilate(const BinaryMask& mask, int radius) {
  const auto offsets = disk_offsets(radius);
  BinaryMask out(mask.width(), mask.height());
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask(x, y)) continue;
      for (const auto& [dx, dy] : offsets) {
        if (mask.contains(x + dx, y + dy)) out(x + dx, y + dy) = 1;
      }
    }
  }
  return out;
}

BinaryMask morph_open_close(const BinaryMask& mask, int radius) {
  if (radius < 1) throw Error(Errc::InvalidArgument, "structuring element radius must be >= 1");
  const BinaryMask opened = dilate(erode(mask, radius), radius);
  return erode(dilate(opened, radius), radius);
}

int label_components(const BinaryMask& mask, Grid<int>& labels) {
  labels = Grid<int>(mask.width(), mask.height(), 0);
  int next = 0;
  std::vector<std::pair<int, int>> stack;
  constexpr std::array<std::pair<int, int>, 4> kSteps{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask(x, y) || labels(x, y)) continue;
      ++next;
      labels(x, y) = next;
      stack.emplace_back(x, y);
      while (!stack.empty()) {
        const auto [cx, cy] = stack.back();
        stack.pop_back();
        for (const auto& [dx, dy] : kSteps) {
          const int nx = cx + dx, ny = cy + dy;
          if (mask.contains(nx, ny) && mask(nx, ny) && !labels(nx, ny)) {
            labels(nx, ny) = next;
            stack.emplace_back(nx, ny);
          }
        }
      }
    }
  }
  return next;
}

BinaryMask largest_component(const BinaryMask& mask) {
  Grid<int> labels;
  const int n = label_components(mask, labels);
  BinaryMask out(mask.width(), mask.height());
  if (n == 0) return out;
  std::vector<std::size_t> area(n + 1, 0);
  for (int l : labels.values()) ++area[l];
  int best = 1;
  for (int l = 2; l <= n; ++l) {
    if (area[l] > area[best]) best = l;
  }
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] = labels.values()[i] == best ? 1 : 0;
  return out;
}

std::vector<Component> extract_components(const BinaryMask& mask, const CoarseParams& p) {
  Grid<int> labels;
  const int n = label_components(mask, labels);
  const int w = mask.width();
  const int h = mask.height();
  struct Stats {
    int area = 0, x0 = 0, y0 = 0, x1 = -1, y1 = -1, perimeter = 0, border_perimeter = 0;
  };
  std::vector<Stats> stats(n + 1);
  for (int l = 1; l <= n; ++l) {
    stats[l].x0 = w;
    stats[l].y0 = h;
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int l = labels(x, y);
      if (!l) continue;
      Stats& s = stats[l];
      ++s.area;
      s.x0 = std::min(s.x0, x);
      s.y0 = std::min(s.y0, y);
      s.x1 = std::max(s.x1, x);
      s.y1 = std::max(s.y1, y);
      const bool on_border = x == 0 || y == 0 || x == w - 1 || y == h - 1;
      const bool interior_edge = (x > 0 && labels(x - 1, y) != l) || (x + 1 < w && labels(x + 1, y) != l) ||
                                 (y > 0 && labels(x, y - 1) != l) || (y + 1 < h && labels(x, y + 1) != l);
      if (on_border || interior_edge) {
        ++s.perimeter;
        if (on_border) ++s.border_perimeter;
      }
    }
  }

  const int max_area = p.resolved_max_area(w * h);
  std::vector<Component> out;
  for (int l = 1; l <= n; ++l) {
    const Stats& s = stats[l];
    if (s.area < p.min_area || s.area > max_area) continue;
    if (s.border_perimeter > 0) {
      const double interior = 1.0 - static_cast<double>(s.border_perimeter) / s.perimeter;
      if (interior < p.border_interior_fraction) continue;
    }
    const int bw = s.x1 - s.x0 + 1;
    const int bh = s.y1 - s.y0 + 1;
    const int mx = static_cast<int>(std::ceil(0.1 * bw));
    const int my = static_cast<int>(std::ceil(0.1 * bh));
    BoundingBox box;
    box.x = std::max(0, s.x0 - mx);
    box.y = std::max(0, s.y0 - my);
    box.w = std::min(w, s.x1 + mx + 1) - box.x;
    box.h = std::min(h, s.y1 + my + 1) - box.y;
    Component comp{box, BinaryMask(box.w, box.h)};
    for (int y = 0; y < box.h; ++y) {
      for (int x = 0; x < box.w; ++x) comp.mask(x, y) = labels(box.x + x, box.y + y) == l ? 1 : 0;
    }
    out.push_back(std::move(comp));
  }
  return out;
}

std::size_t mask_area(const BinaryMask& mask) {
  std::size_t n = 0;
  for (auto v : mask.values()) n += v ? 1 : 0;
  return n;
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw Error(Errc::DimensionMismatch, "masks differ in size");
  }
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool fa = a.values()[i] != 0;
    const bool fb = b.values()[i] != 0;
    inter += (fa && fb) ? 1 : 0;
    uni += (fa || fb) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace palyno::seg
