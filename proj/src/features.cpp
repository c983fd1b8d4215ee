#include <cmath>
#include <functional>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "palyno/error.hpp"
#include "palyno/features.hpp"
#include "palyno/parallel.hpp"

namespace palyno::features {

namespace {

constexpr std::array<std::string_view, 5> kStatNames{"mean", "std", "skewness", "kurtosis", "median"};
constexpr std::array<std::string_view, 3> kTamuraNames{"coarseness", "contrast", "directionality"};
constexpr std::array<std::string_view, 8> kEdgeNames{"fraction", "mean_magnitude", "std_magnitude", "orient0",
                                                     "orient45", "orient90", "orient135", "homogeneity"};

std::string two_digits(int k) { return (k < 10 ? "0" : "") + std::to_string(k); }

FeatureCatalog build_catalog() {
  FeatureCatalog cat;
  auto add = [&](TransformPlane plane, const std::string& family, int index, std::string name) {
    cat.entries.push_back({std::string(to_string(plane)) + "." + family + "." + name, plane, family, index});
  };
  for (TransformPlane plane : kAllPlanes) {
    for (int i = 0; i < 5; ++i) add(plane, "stats", i, std::string(kStatNames[i]));
    int idx = 0;
    for (int bins : {3, 5, 7, 9})
      for (int b = 0; b < bins; ++b) add(plane, "hist", idx++, "h" + std::to_string(bins) + "_b" + std::to_string(b));
    for (int i = 0; i < 13; ++i) add(plane, "haralick", i, std::string(kHaralickNames[i]) + "_mean");
    for (int i = 0; i < 13; ++i) add(plane, "haralick", 13 + i, std::string(kHaralickNames[i]) + "_range");
    for (int i = 0; i < 3; ++i) add(plane, "tamura", i, std::string(kTamuraNames[i]));
  }
  int idx = 0;
  for (int n = 0; n <= 8; ++n)
    for (int m = n % 2; m <= n; m += 2)
      add(TransformPlane::Raw, "zernike", idx++, "z" + std::to_string(n) + "_" + std::to_string(m));
  for (int i = 0; i < 8; ++i) add(TransformPlane::Raw, "edge", i, std::string(kEdgeNames[i]));
  for (TransformPlane plane : {TransformPlane::Raw, TransformPlane::FourierMagnitude})
    for (int b = 0; b < 32; ++b) add(plane, "chebhist", b, "b" + two_digits(b));
  for (int i = 0; i < 25; ++i)
    cat.entries.push_back({"shape." + std::string(kShapeNames[i]), TransformPlane::Raw, "shape", i});
  return cat;
}

// Runs one family, writing `count` values at `out`; failures leave zeros.
template <std::size_t N>
void run_family(const std::string& source, const std::string& label, double* out,
                const std::function<std::array<double, N>()>& fn) {
  try {
    const auto values = fn();
    for (std::size_t i = 0; i < N; ++i) {
      if (std::isfinite(values[i])) {
        out[i] = values[i];
      } else {
        spdlog::debug("feature {} [{}] of '{}' is non-finite, set to 0", label, i, source);
        out[i] = 0.0;
      }
    }
  } catch (const Error& e) {
    spdlog::debug("feature family {} failed on '{}': {}; substituting 0", label, source, e.what());
    std::fill(out, out + N, 0.0);
  }
}

FeatureVector extract_default(const seg::GrainRecord& rec) {
  FeatureVector v(default_catalog().size(), 0.0);
  double* out = v.data();
  const std::string& src = rec.source_id;

  // Planes in catalog order; compounds reuse their inner transform.
  std::array<Image, 6> planes;
  std::array<bool, 6> ok{};
  auto make = [&](std::size_t i, const std::function<Image()>& fn) {
    try {
      planes[i] = fn();
      ok[i] = true;
    } catch (const Error& e) {
      spdlog::debug("transform {} failed on '{}': {}; substituting 0", to_string(kAllPlanes[i]), src, e.what());
    }
  };
  const Image& raw = rec.masked_image;
  make(0, [&] { return transform_image(raw, TransformPlane::Raw); });
  make(1, [&] { return transform_image(raw, TransformPlane::FourierMagnitude); });
  make(2, [&] { return transform_image(raw, TransformPlane::Chebyshev); });
  make(3, [&] { return transform_image(raw, TransformPlane::WaveletLL); });
  if (ok[3]) make(4, [&] { return transform_image(planes[3], TransformPlane::FourierMagnitude); });
  if (ok[1]) make(5, [&] { return transform_image(planes[1], TransformPlane::Chebyshev); });

  for (std::size_t i = 0; i < planes.size(); ++i) {
    const std::string name(to_string(kAllPlanes[i]));
    if (ok[i]) {
      const Image& img = planes[i];
      if (i == 0)
        run_family<5>(src, name + ".stats", out, [&] { return pixel_statistics(rec.image, &rec.mask); });
      else
        run_family<5>(src, name + ".stats", out, [&] { return pixel_statistics(img); });
      run_family<24>(src, name + ".hist", out + 5, [&] { return multiscale_histograms(img); });
      run_family<26>(src, name + ".haralick", out + 29, [&] { return haralick_glcm(img); });
      run_family<3>(src, name + ".tamura", out + 55, [&] { return tamura_features(img); });
    }
    out += 58;
  }
  run_family<25>(src, "raw.zernike", out, [&] { return zernike_magnitudes(raw); });
  run_family<8>(src, "raw.edge", out + 25, [&] { return edge_statistics(raw); });
  out += 33;
  run_family<32>(src, "raw.chebhist", out, [&] { return chebyshev_coeff_histogram(raw); });
  if (ok[1]) run_family<32>(src, "fourier.chebhist", out + 32, [&] { return chebyshev_coeff_histogram(planes[1]); });
  out += 64;
  run_family<25>(src, "shape", out, [&] { return shape_features(rec.mask); });
  return v;
}

}  // namespace

std::vector<std::string> FeatureCatalog::names() const {
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.name);
  return out;
}

const FeatureCatalog& default_catalog() {
  static const FeatureCatalog cat = build_catalog();
  return cat;
}

FeatureVector extract_all(const seg::GrainRecord& rec, const FeatureCatalog& catalog) {
  if (rec.image.empty() || rec.mask.width() != rec.image.width() || rec.mask.height() != rec.image.height() ||
      rec.masked_image.width() != rec.image.width() || rec.masked_image.height() != rec.image.height())
    throw Error(Errc::DimensionMismatch, "extract_all: grain image, mask and masked image must share one size");
  FeatureVector full = extract_default(rec);
  const FeatureCatalog& def = default_catalog();
  if (&catalog == &def) return full;

  std::unordered_map<std::string_view, std::size_t> index;
  for (std::size_t i = 0; i < def.entries.size(); ++i) index.emplace(def.entries[i].name, i);
  FeatureVector out;
  out.reserve(catalog.size());
  for (const auto& e : catalog.entries) {
    const auto it = index.find(e.name);
    if (it == index.end()) throw Error(Errc::InvalidArgument, "extract_all: unknown catalog entry '" + e.name + "'");
    out.push_back(full[it->second]);
  }
  return out;
}

std::vector<FeatureVector> extract_batch(const std::vector<seg::GrainRecord>& grains, int threads,
                                         const FeatureCatalog& catalog) {
  std::vector<FeatureVector> out(grains.size());
  parallel_for(grains.size(), threads, [&](std::size_t i) { out[i] = extract_all(grains[i], catalog); });
  return out;
}

}  // namespace palyno::features
