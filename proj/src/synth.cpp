#include "palyno/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "palyno/filters.hpp"
#include "palyno/random.hpp"

namespace palyno::synth {

void SynthConfig::validate() const {
  if (n_types < 1 || n_outlier_types < 0 || grains_per_type < 1 || planes < 1 || sharp_plane < 0 ||
      sharp_plane >= planes || blur_per_plane < 0.0 || psf_sigma < 0.0 || field_width < 16 ||
      field_height < 16 || grains_per_field < 0 || background <= 0.0 || background > 1.0 ||
      noise_sigma < 0.0 || debris_density < 0.0 || cluster_probability < 0.0 || cluster_probability > 1.0) {
    throw Error(Errc::InvalidArgument, "invalid synthetic generator configuration");
  }
}

TypeStyle SynthConfig::style(int type_id) const {
  if (type_id >= 0 && static_cast<std::size_t>(type_id) < styles.size()) return styles[type_id];
  return default_style(type_id);
}

TypeStyle default_style(int type_id) {
  TypeStyle s;
  switch (type_id) {
    case 0:  // small round, dense dark granules
      s.radius_min = 20; s.radius_max = 23; s.interior = 0.45; s.rim = 0.22;
      s.spot_density = 2.5; s.spot_radius = 1.3; s.spot_contrast = -0.18;
      return s;
    case 1:  // large, three-lobed, smooth
      s.radius_min = 29; s.radius_max = 32; s.lobes = 3; s.lobe_amplitude = 0.08;
      s.interior = 0.55; s.rim = 0.28; s.spot_density = 0.3; s.spot_radius = 2.5; s.spot_contrast = -0.08;
      return s;
    case 2:  // elongated, striated
      s.radius_min = 24; s.radius_max = 27; s.elongation = 1.55; s.interior = 0.5; s.rim = 0.25;
      s.stripe_frequency = 0.2; s.stripe_contrast = 0.2;
      return s;
    case 3:  // large, bright reticulate spots
      s.radius_min = 31; s.radius_max = 34; s.elongation = 1.15; s.interior = 0.36; s.rim = 0.2;
      s.spot_density = 1.6; s.spot_radius = 2.2; s.spot_contrast = 0.22;
      return s;
    case 4:  // small four-lobed, fine stripes
      s.radius_min = 19; s.radius_max = 22; s.lobes = 4; s.lobe_amplitude = 0.07; s.interior = 0.6;
      s.rim = 0.3; s.stripe_frequency = 0.4; s.stripe_contrast = 0.14;
      return s;
    case 5:  // outlier: pale, five-lobed, no texture
      s.radius_min = 25; s.radius_max = 28; s.lobes = 5; s.lobe_amplitude = 0.1; s.elongation = 1.25;
      s.interior = 0.7; s.rim = 0.4; s.rim_width = 2.0;
      return s;
    case 6:  // outlier: dark, thick rim, coarse dark blotches
      s.radius_min = 34; s.radius_max = 37; s.interior = 0.3; s.rim = 0.12; s.rim_width = 5.0;
      s.spot_density = 0.6; s.spot_radius = 3.5; s.spot_contrast = -0.12; s.stripe_frequency = 0.08;
      s.stripe_contrast = 0.1;
      return s;
    default: break;
  }
  // Further types: deterministic pseudo-random styles.
  Rng rng(derive_seed(0x5eedULL, {static_cast<std::uint64_t>(type_id)}));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  s.radius_min = 19.0 + 16.0 * u(rng);
  s.radius_max = s.radius_min + 3.0;
  s.elongation = 1.0 + 0.6 * u(rng);
  s.lobes = static_cast<int>(6 * u(rng));
  s.lobe_amplitude = s.lobes > 1 ? 0.04 + 0.06 * u(rng) : 0.0;
  s.interior = 0.3 + 0.4 * u(rng);
  s.rim = s.interior - 0.12 - 0.1 * u(rng);
  s.rim_width = 2.0 + 3.0 * u(rng);
  if (u(rng) < 0.5) {
    s.stripe_frequency = 0.08 + 0.35 * u(rng);
    s.stripe_contrast = 0.08 + 0.14 * u(rng);
  }
  if (u(rng) < 0.6) {
    s.spot_density = 0.3 + 2.2 * u(rng);
    s.spot_radius = 1.2 + 2.3 * u(rng);
    s.spot_contrast = (u(rng) < 0.5 ? -1.0 : 1.0) * (0.08 + 0.15 * u(rng));
  }
  return s;
}

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

struct GrainInstance {
  int type_id = 0;
  TypeStyle style;
  double cx = 0, cy = 0, radius = 0, angle = 0, lobe_phase = 0, stripe_phase = 0;
  std::vector<std::pair<double, double>> spots;  // grain frame

  [[nodiscard]] double extent() const {
    const double e = std::sqrt(style.elongation);
    return radius * e * (1.0 + style.lobe_amplitude);
  }

  // Approximate signed distance to the boundary (negative inside) and frame coordinates.
  double signed_distance(double x, double y, double& u, double& v) const {
    const double dx = x - cx, dy = y - cy;
    const double c = std::cos(angle), s = std::sin(angle);
    u = c * dx + s * dy;
    v = -s * dx + c * dy;
    const double e = std::sqrt(style.elongation);
    const double un = u / e, vn = v * e;
    const double rn = std::hypot(un, vn);
    const double theta = std::atan2(vn, un);
    const double rho = radius * (1.0 + style.lobe_amplitude * std::cos(style.lobes * (theta - lobe_phase)));
    return rn - rho;
  }

  [[nodiscard]] double texture(double u, double v) const {
    double t = style.interior;
    if (style.stripe_frequency > 0.0) {
      t += 0.5 * style.stripe_contrast * std::cos(2.0 * std::numbers::pi * style.stripe_frequency * u + stripe_phase);
    }
    const double inv = 1.0 / (2.0 * style.spot_radius * style.spot_radius);
    for (const auto& [su, sv] : spots) {
      const double d2 = (u - su) * (u - su) + (v - sv) * (v - sv);
      if (d2 < 16.0 * style.spot_radius * style.spot_radius) t += style.spot_contrast * std::exp(-d2 * inv);
    }
    return t;
  }
};

GrainInstance make_grain(const TypeStyle& style, int type_id, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GrainInstance g;
  g.type_id = type_id;
  g.style = style;
  g.radius = style.radius_min + (style.radius_max - style.radius_min) * u(rng);
  g.angle = std::numbers::pi * u(rng);
  g.lobe_phase = 2.0 * std::numbers::pi * u(rng);
  g.stripe_phase = 2.0 * std::numbers::pi * u(rng);
  const double area = std::numbers::pi * g.radius * g.radius;
  std::poisson_distribution<int> count(std::max(1e-9, style.spot_density * area / 100.0));
  const int n = style.spot_density > 0.0 ? count(rng) : 0;
  const double e = std::sqrt(style.elongation);
  for (int i = 0; i < n; ++i) {
    const double r = g.radius * std::sqrt(u(rng));
    const double a = 2.0 * std::numbers::pi * u(rng);
    g.spots.emplace_back(r * std::cos(a) * e, r * std::sin(a) / e);
  }
  return g;
}

void render_grain(const GrainInstance& g, double psf, RealField& field, GroundTruthGrain& truth) {
  const int w = field.width();
  const int h = field.height();
  const double reach = g.extent() + 4.0 * psf + 2.0;
  const int x0 = std::max(0, static_cast<int>(std::floor(g.cx - reach)));
  const int x1 = std::min(w - 1, static_cast<int>(std::ceil(g.cx + reach)));
  const int y0 = std::max(0, static_cast<int>(std::floor(g.cy - reach)));
  const int y1 = std::min(h - 1, static_cast<int>(std::ceil(g.cy + reach)));
  const double edge = std::max(psf, 0.35);

  int mx0 = w, my0 = h, mx1 = -1, my1 = -1;
  BinaryMask local(x1 - x0 + 1, y1 - y0 + 1);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      double u, v;
      const double d = g.signed_distance(x, y, u, v);
      if (d <= 0.0) {
        local(x - x0, y - y0) = 1;
        mx0 = std::min(mx0, x);
        my0 = std::min(my0, y);
        mx1 = std::max(mx1, x);
        my1 = std::max(my1, y);
      }
      const double coverage = psf > 0.0 ? normal_cdf(-d / psf) : (d <= 0.0 ? 1.0 : 0.0);
      if (coverage < 1e-6) continue;
      const double rim_weight = normal_cdf((g.style.rim_width + d) / edge);
      const double inside = rim_weight * g.style.rim + (1.0 - rim_weight) * g.texture(u, v);
      field(x, y) = (1.0 - coverage) * field(x, y) + coverage * inside;
    }
  }
  truth.type_id = g.type_id;
  if (mx1 < 0) return;
  truth.box = BoundingBox{mx0, my0, mx1 - mx0 + 1, my1 - my0 + 1};
  truth.mask = BinaryMask(truth.box.w, truth.box.h);
  for (int y = 0; y < truth.box.h; ++y) {
    for (int x = 0; x < truth.box.w; ++x) truth.mask(x, y) = local(mx0 - x0 + x, my0 - y0 + y);
  }
}

SynthStack render(const SynthConfig& cfg, int type_id, std::uint64_t seed, bool full_stack) {
  cfg.validate();
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int w = cfg.field_width;
  const int h = cfg.field_height;

  SynthStack out;
  out.sharp_plane = cfg.random_sharp_plane ? static_cast<int>(u(rng) * cfg.planes) : cfg.sharp_plane;
  out.sharp_plane = std::clamp(out.sharp_plane, 0, cfg.planes - 1);

  std::vector<GrainInstance> grains;
  for (int k = 0; k < cfg.grains_per_field; ++k) {
    const int t = type_id >= 0 ? type_id : static_cast<int>(u(rng) * cfg.n_types);
    GrainInstance g = make_grain(cfg.style(t), t, rng);
    const double ext = g.extent();
    bool placed = false;
    const bool cluster = !grains.empty() && u(rng) < cfg.cluster_probability;
    for (int attempt = 0; attempt < 400 && !placed; ++attempt) {
      if (cluster) {
        const GrainInstance& other = grains.back();
        const double a = 2.0 * std::numbers::pi * u(rng);
        const double dist = other.radius + g.radius - 1.0;
        g.cx = other.cx + dist * std::cos(a);
        g.cy = other.cy + dist * std::sin(a);
      } else if (cfg.grains_per_field == 1) {
        g.cx = 0.5 * w + (u(rng) - 0.5) * 16.0;
        g.cy = 0.5 * h + (u(rng) - 0.5) * 16.0;
      } else {
        g.cx = ext + 6.0 + u(rng) * (w - 2.0 * (ext + 6.0));
        g.cy = ext + 6.0 + u(rng) * (h - 2.0 * (ext + 6.0));
      }
      if (g.cx - ext < 4.0 || g.cy - ext < 4.0 || g.cx + ext > w - 5.0 || g.cy + ext > h - 5.0) continue;
      placed = true;
      for (std::size_t j = 0; j < grains.size(); ++j) {
        const double min_gap = (cluster && j + 1 == grains.size()) ? 0.0 : 12.0;
        const double dist = std::hypot(g.cx - grains[j].cx, g.cy - grains[j].cy);
        if (cluster && j + 1 == grains.size()) continue;
        if (dist < ext + grains[j].extent() + min_gap) {
          placed = false;
          break;
        }
      }
    }
    if (placed) grains.push_back(std::move(g));
  }

  RealField clean(w, h, cfg.background);
  // faint illumination falloff so the background is not perfectly flat
  const double vx = u(rng) - 0.5, vy = u(rng) - 0.5;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) clean(x, y) += 0.03 * (vx * (x - 0.5 * w) / w + vy * (y - 0.5 * h) / h);
  }
  for (const GrainInstance& g : grains) {
    GroundTruthGrain truth;
    render_grain(g, cfg.psf_sigma, clean, truth);
    out.grains.push_back(std::move(truth));
  }

  // Debris: small dark specks kept away from the grains.
  std::poisson_distribution<int> debris_count(std::max(1e-9, cfg.debris_density * w * h / 1e4));
  const int n_debris = cfg.debris_density > 0.0 ? debris_count(rng) : 0;
  for (int k = 0; k < n_debris; ++k) {
    const double r = 1.0 + 1.5 * u(rng);
    const double amp = 0.25 + 0.25 * u(rng);
    const double cx = 3.0 + u(rng) * (w - 6.0);
    const double cy = 3.0 + u(rng) * (h - 6.0);
    bool clear = true;
    for (const GrainInstance& g : grains) {
      double uu, vv;
      if (g.signed_distance(cx, cy, uu, vv) < 3.0 * r + 8.0) clear = false;
    }
    if (!clear) continue;
    const int reach = static_cast<int>(std::ceil(4.0 * r));
    for (int y = std::max(0, static_cast<int>(cy) - reach); y <= std::min(h - 1, static_cast<int>(cy) + reach); ++y) {
      for (int x = std::max(0, static_cast<int>(cx) - reach); x <= std::min(w - 1, static_cast<int>(cx) + reach); ++x) {
        const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        clean(x, y) -= amp * std::exp(-d2 / (2.0 * r * r));
      }
    }
    out.debris.push_back(BoundingBox{static_cast<int>(cx) - reach, static_cast<int>(cy) - reach, 2 * reach + 1,
                                     2 * reach + 1});
  }
  out.clean = clamp_to_unit(clean);

  std::normal_distribution<double> noise(0.0, 1.0);
  const int first = full_stack ? 0 : out.sharp_plane;
  const int last = full_stack ? cfg.planes - 1 : out.sharp_plane;
  for (int k = first; k <= last; ++k) {
    RealField plane = gaussian_blur(out.clean, cfg.blur_per_plane * std::abs(k - out.sharp_plane));
    Rng plane_rng(derive_seed(seed, {static_cast<std::uint64_t>(k)}));
    if (cfg.noise_sigma > 0.0) {
      for (double& v : plane.values()) v += cfg.noise_sigma * noise(plane_rng);
    }
    out.stack.planes.push_back(clamp_to_unit(std::move(plane)));
  }
  if (!full_stack) out.sharp_plane = 0;
  return out;
}

}  // namespace

SynthStack synth_stack(const SynthConfig& cfg, int type_id, std::uint64_t seed) {
  return render(cfg, type_id, seed, true);
}

SynthStack synth_field(const SynthConfig& cfg, int type_id, std::uint64_t seed) {
  return render(cfg, type_id, seed, false);
}

BinaryMask full_mask(const SynthStack& s, std::size_t k) {
  const Image& ref = s.clean;
  BinaryMask out(ref.width(), ref.height());
  const GroundTruthGrain& g = s.grains.at(k);
  for (int y = 0; y < g.box.h; ++y) {
    for (int x = 0; x < g.box.w; ++x) out(g.box.x + x, g.box.y + y) = g.mask(x, y);
  }
  return out;
}

}  // namespace palyno::synth
