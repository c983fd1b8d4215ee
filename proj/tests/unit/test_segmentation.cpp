#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <queue>

#include "palyno/filters.hpp"
#include "palyno/random.hpp"
#include "palyno/segmentation.hpp"
#include "palyno/synth.hpp"
#include "test_support.hpp"

namespace palyno::seg {
namespace {

// Otsu threshold over a 256-bin histogram (between-class variance maximizer).
double otsu_threshold(const Image& img) {
  std::array<double, 256> hist{};
  for (double v : img.values()) hist[std::clamp(static_cast<int>(v * 255.0 + 0.5), 0, 255)] += 1.0;
  const double n = static_cast<double>(img.size());
  double total = 0.0;
  for (int i = 0; i < 256; ++i) total += i * hist[i];
  double w0 = 0.0, sum0 = 0.0, best = -1.0;
  int best_t = 0;
  for (int t = 0; t < 256; ++t) {
    w0 += hist[t];
    sum0 += t * hist[t];
    if (w0 == 0.0 || w0 == n) continue;
    const double m0 = sum0 / w0, m1 = (total - sum0) / (n - w0);
    const double between = w0 * (n - w0) * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      best_t = t;
    }
  }
  return (best_t + 0.5) / 255.0;
}

// Background pixels reachable from the border through 4-neighbours.
BinaryMask border_reachable(const BinaryMask& m) {
  const int w = m.width(), h = m.height();
  BinaryMask seen(w, h);
  std::queue<std::pair<int, int>> q;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if ((x == 0 || y == 0 || x == w - 1 || y == h - 1) && !m(x, y)) {
        seen(x, y) = 1;
        q.push({x, y});
      }
  while (!q.empty()) {
    auto [x, y] = q.front();
    q.pop();
    for (auto [dx, dy] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
      const int nx = x + dx, ny = y + dy;
      if (m.contains(nx, ny) && !m(nx, ny) && !seen(nx, ny)) {
        seen(nx, ny) = 1;
        q.push({nx, ny});
      }
    }
  }
  return seen;
}

Contour circle(double cx, double cy, double r, int n) {
  Contour c;
  for (int k = 0; k < n; ++k) {
    const double a = 2.0 * M_PI * k / n;
    c.points.push_back({cx + r * std::cos(a), cy + r * std::sin(a)});
  }
  return c;
}

// Soft-edged dark disk on a bright background.
Image soft_disk(int size, double cx, double cy, double r) {
  return test::make_image(size, size, [&](int x, int y) {
    const double c = 0.5 * std::erfc((std::hypot(x - cx, y - cy) - r) / std::sqrt(2.0));
    return 0.85 * (1 - c) + 0.3 * c;
  });
}

double mean_abs_radial_error(const Contour& c, double cx, double cy, double r) {
  double s = 0.0;
  for (const auto& p : c.points) s += std::abs(std::hypot(p.x - cx, p.y - cy) - r);
  return s / c.points.size();
}

TEST(Preprocess, UniformStaysUniform) {
  const Image out = preprocess(Image(64, 64, 0.4), CoarseParams{});
  const auto [lo, hi] = std::ranges::minmax_element(out.values());
  EXPECT_EQ(*lo, *hi);
}

TEST(Preprocess, MedianRemovesSaltAndPepper) {
  const Image clean(64, 64, 0.5);
  Image noisy = clean;
  Rng rng(3);
  std::uniform_int_distribution<int> pos(0, 63);
  for (int i = 0; i < 120; ++i) noisy(pos(rng), pos(rng)) = (i % 2) ? 1.0 : 0.0;
  const Image out = median_filter(noisy, 2);
  std::size_t restored = 0;
  for (std::size_t i = 0; i < out.size(); ++i) restored += out.values()[i] == clean.values()[i];
  EXPECT_GE(restored, 0.99 * out.size());
}

TEST(Preprocess, LowContrastRampIsStretched) {
  const Image ramp = test::make_image(64, 64, [](int x, int) { return 0.45 + 0.1 * x / 63.0; });
  const Image out = preprocess(ramp, CoarseParams{});
  const auto [lo, hi] = std::ranges::minmax_element(out.values());
  EXPECT_GT(*hi - *lo, 0.1);
}

TEST(KMeans, TwoValuedDiskIsExact) {
  const BinaryMask disk = test::disk_mask(80, 80, 40, 40, 15);
  EXPECT_EQ(kmeans_binary(test::from_mask(disk, 0.2, 0.8)), disk);
}

TEST(KMeans, ConstantImageIsDegenerate) {
  try {
    kmeans_binary(Image(10, 10, 0.5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DegenerateClustering);
  }
}

TEST(KMeans, NoisyDiskAgreesWithOtsu) {
  const BinaryMask disk = test::disk_mask(100, 100, 50, 50, 25);
  Rng rng(9);
  std::normal_distribution<double> noise(0.0, 0.05);
  Image img = test::from_mask(disk, 0.3, 0.9);
  for (double& v : img.values()) v = std::clamp(v + noise(rng), 0.0, 1.0);
  const BinaryMask km = kmeans_binary(img);
  const double t = otsu_threshold(img);
  std::size_t agree = 0;
  for (int y = 0; y < 100; ++y)
    for (int x = 0; x < 100; ++x) agree += (km(x, y) != 0) == (img(x, y) < t);
  EXPECT_GE(agree, 0.99 * img.size());
}

TEST(FillHoles, AnnulusBecomesDisk) {
  BinaryMask ring = test::disk_mask(60, 60, 30, 30, 20);
  const BinaryMask inner = test::disk_mask(60, 60, 30, 30, 10);
  for (std::size_t i = 0; i < ring.size(); ++i) ring.values()[i] &= !inner.values()[i];
  EXPECT_EQ(fill_holes(ring), test::disk_mask(60, 60, 30, 30, 20));
}

TEST(FillHoles, IdempotentWithoutHoles) {
  const BinaryMask d = test::disk_mask(40, 40, 20, 20, 12);
  EXPECT_EQ(fill_holes(d), d);
  EXPECT_EQ(fill_holes(fill_holes(d)), fill_holes(d));
}

TEST(FillHoles, ChannelToBorderIsNotFilled) {
  BinaryMask m(40, 40);
  for (int y = 5; y < 35; ++y)
    for (int x = 5; x < 35; ++x) m(x, y) = (x < 8 || x > 31 || y < 8 || y > 31);
  for (int x = 0; x < 20; ++x) m(x, 20) = 0;  // 1-pixel channel to the left border
  const BinaryMask filled = fill_holes(m);
  const BinaryMask open = border_reachable(m);
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 40; ++x) EXPECT_EQ(filled(x, y) != 0, m(x, y) || !open(x, y)) << x << "," << y;
  EXPECT_EQ(filled(20, 20), 0);
}

TEST(Morphology, IsolatedPixelRemoved) {
  BinaryMask m(20, 20);
  m(10, 10) = 1;
  EXPECT_EQ(mask_area(morph_open_close(m, 1)), 0u);
}

TEST(Morphology, DiskAreaPreserved) {
  const BinaryMask d = test::disk_mask(80, 80, 40, 40, 20);
  const double a0 = mask_area(d), a1 = mask_area(morph_open_close(d, 3));
  EXPECT_NEAR(a1 / a0, 1.0, 0.05);
}

TEST(Morphology, BridgeRemoved) {
  BinaryMask m = test::disk_mask(100, 50, 25, 25, 12);
  const BinaryMask right = test::disk_mask(100, 50, 75, 25, 12);
  for (std::size_t i = 0; i < m.size(); ++i) m.values()[i] |= right.values()[i];
  for (int x = 25; x < 75; ++x) m(x, 25) = 1;
  Grid<int> labels;
  ASSERT_EQ(label_components(m, labels), 1);
  EXPECT_EQ(label_components(morph_open_close(m, 2), labels), 2);
}

TEST(Morphology, OpeningShrinksClosingGrows) {
  const BinaryMask d = test::disk_mask(50, 50, 25, 25, 14);
  const BinaryMask opened = dilate(erode(d, 2), 2);
  const BinaryMask closed = erode(dilate(d, 2), 2);
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_LE(opened.values()[i], d.values()[i]);
    EXPECT_GE(closed.values()[i], d.values()[i]);
  }
}

TEST(Components, TwoSeparatedDisks) {
  BinaryMask m = test::disk_mask(200, 100, 50, 50, 20);
  const BinaryMask b = test::disk_mask(200, 100, 150, 50, 20);
  for (std::size_t i = 0; i < m.size(); ++i) m.values()[i] |= b.values()[i];
  const auto comps = extract_components(m, CoarseParams{});
  ASSERT_EQ(comps.size(), 2u);
  for (const auto& c : comps) {
    const int cx = c.box.x + c.box.w / 2;
    EXPECT_TRUE(std::abs(cx - 50) <= 1 || std::abs(cx - 150) <= 1);
    EXPECT_GE(c.box.w, 41);
    EXPECT_EQ(mask_area(c.mask), mask_area(test::disk_mask(200, 100, 50, 50, 20)));
  }
}

TEST(Components, EmptyAndSpeck) {
  EXPECT_TRUE(extract_components(BinaryMask(50, 50), CoarseParams{}).empty());
  EXPECT_TRUE(extract_components(test::disk_mask(50, 50, 25, 25, 3), CoarseParams{}).empty());
}

TEST(Gvf, UniformImageGivesZeroField) {
  const auto f = gvf_field(Image(30, 30, 0.5), SnakeParams{});
  for (double v : f.u.values()) EXPECT_EQ(v, 0.0);
  for (double v : f.v.values()) EXPECT_EQ(v, 0.0);
}

TEST(Gvf, StepEdgeFieldPointsTowardEdge) {
  const Image img = test::make_image(40, 20, [](int x, int) { return x < 20 ? 0.2 : 0.8; });
  const auto f = gvf_field(img, SnakeParams{});
  for (int y = 0; y < 20; ++y) {
    for (int x = 16; x <= 18; ++x) EXPECT_GT(f.u(x, y), 0.0) << x;
    for (int x = 21; x <= 23; ++x) EXPECT_LT(f.u(x, y), 0.0) << x;
  }
}

TEST(Gvf, MagnitudeBoundedByEdgeGradient) {
  const Image img = soft_disk(48, 23.5, 24.2, 12);
  SnakeParams p;
  // Edge map as the field is built from: normalized |grad(smoothed)|^2.
  const Gradient g = central_gradient(gaussian_blur(img, p.edge_sigma));
  RealField edge(48, 48);
  double mx = 0.0;
  for (std::size_t i = 0; i < edge.size(); ++i) {
    edge.values()[i] = g.dx.values()[i] * g.dx.values()[i] + g.dy.values()[i] * g.dy.values()[i];
    mx = std::max(mx, edge.values()[i]);
  }
  for (double& v : edge.values()) v /= mx;
  const Gradient fg = central_gradient(edge);
  double bound = 0.0;
  for (std::size_t i = 0; i < edge.size(); ++i) bound = std::max(bound, std::hypot(fg.dx.values()[i], fg.dy.values()[i]));
  for (int iters : {1, 5, 20, 80}) {
    p.gvf_iterations = iters;
    const auto f = gvf_field(img, p);
    for (std::size_t i = 0; i < f.u.size(); ++i)
      ASSERT_LE(std::hypot(f.u.values()[i], f.v.values()[i]), bound * (1 + 1e-9)) << iters;
  }
}

TEST(Subsample, TwoHundredPointsStrideTwenty) {
  EXPECT_EQ(subsample_contour(circle(0, 0, 10, 200), 20).points.size(), 10u);
}

TEST(Subsample, MinimumOfEightPoints) {
  const Contour c = circle(0, 0, 10, 60);
  const Contour s = subsample_contour(c, 20);
  ASSERT_EQ(s.points.size(), 8u);
  for (const auto& p : s.points) EXPECT_NE(std::find(c.points.begin(), c.points.end(), p), c.points.end());
}

TEST(Subsample, StrideOneUnchanged) {
  const Contour c = circle(3, 4, 10, 37);
  EXPECT_EQ(subsample_contour(c, 1).points, c.points);
}

TEST(Snake, DilatedInitConvergesToDisk) {
  const double cx = 60.3, cy = 59.6, r = 40.0;
  const Image img = soft_disk(120, cx, cy, r);
  const Contour out = snake_refine(img, circle(cx, cy, r + 3, 100), SnakeParams{});
  EXPECT_LE(mean_abs_radial_error(out, cx, cy, r), 1.5);
  for (const auto& p : out.points) {
    EXPECT_GE(p.x, 0.0);
    EXPECT_LE(p.x, 119.0);
  }
}

TEST(Snake, StaysOnStrongEdgeWithoutBalloon) {
  const double cx = 60.3, cy = 59.6, r = 40.0;
  SnakeParams p;
  p.balloon = 0.0;
  const Contour out = snake_refine(soft_disk(120, cx, cy, r), circle(cx, cy, r, 100), p);
  EXPECT_LE(mean_abs_radial_error(out, cx, cy, r), 0.5);
  EXPECT_EQ(SnakeParams{}.iterations, 100);
}

TEST(Snake, RefinedAreaCloseToCoarse) {
  const double cx = 50.2, cy = 49.7, r = 30.0;
  const Image img = soft_disk(100, cx, cy, r);
  const auto coarse = coarse_stage(img, CoarseParams{});
  ASSERT_EQ(coarse.components.size(), 1u);
  const auto recs = segment_grains(img, CoarseParams{}, SnakeParams{});
  ASSERT_EQ(recs.size(), 1u);
  const double a_coarse = mask_area(coarse.components[0].mask), a_fine = mask_area(recs[0].mask);
  EXPECT_LE(std::abs(a_fine - a_coarse) / a_coarse, 0.25);
}

TEST(SegmentGrains, FiveGrainField) {
  synth::SynthConfig cfg;
  cfg.field_width = cfg.field_height = 320;
  cfg.grains_per_field = 5;
  cfg.debris_density = 2.0;
  const auto s = synth::synth_field(cfg, -1, derive_seed(42, {0}));
  ASSERT_EQ(s.grains.size(), 5u);
  ASSERT_FALSE(s.debris.empty());
  const Image& img = s.stack.planes[0];
  const auto recs = segment_grains(img, CoarseParams{}, SnakeParams{}, "field");
  ASSERT_EQ(recs.size(), 5u);  // debris yields no records
  for (std::size_t k = 0; k < s.grains.size(); ++k) {
    double best = 0.0;
    for (const auto& r : recs)
      best = std::max(best, mask_iou(synth::full_mask(s, k), test::place(r.mask, r.box, img.width(), img.height())));
    EXPECT_GE(best, 0.9) << "grain " << k;
  }
  for (const auto& r : recs) {
    EXPECT_EQ(r.image.width(), r.mask.width());
    EXPECT_EQ(r.masked_image.height(), r.mask.height());
    Grid<int> labels;
    EXPECT_EQ(label_components(r.mask, labels), 1);
    for (std::size_t i = 0; i < r.mask.size(); ++i)
      EXPECT_EQ(r.masked_image.values()[i], r.mask.values()[i] ? r.image.values()[i] : 0.0);
  }
}

TEST(SegmentGrains, BlankFieldGivesNoRecords) {
  Image blank(160, 160, 0.85);
  Rng rng(1);
  std::normal_distribution<double> noise(0.0, 0.01);
  for (double& v : blank.values()) v = std::clamp(v + noise(rng), 0.0, 1.0);
  EXPECT_TRUE(segment_grains(blank, CoarseParams{}, SnakeParams{}).empty());
  EXPECT_TRUE(segment_grains(Image(160, 160, 0.85), CoarseParams{}, SnakeParams{}).empty());
}

TEST(SegmentGrains, Deterministic) {
  synth::SynthConfig cfg;
  const auto s = synth::synth_field(cfg, 3, 77);
  const auto a = segment_grains(s.stack.planes[0], CoarseParams{}, SnakeParams{});
  const auto b = segment_grains(s.stack.planes[0], CoarseParams{}, SnakeParams{});
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].box, b[i].box);
    EXPECT_EQ(a[i].mask, b[i].mask);
  }
}

}  // namespace
}  // namespace palyno::seg
