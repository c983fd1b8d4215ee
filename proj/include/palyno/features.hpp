#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "palyno/image.hpp"
#include "palyno/segmentation.hpp"

namespace palyno::features {

inline constexpr std::string_view kCatalogVersion = "palyno-catalog-1";
inline constexpr int kChebyshevOrder = 20;
inline constexpr int kGlcmLevels = 32;

enum class TransformPlane { Raw, FourierMagnitude, Chebyshev, WaveletLL, FourierOfWavelet, ChebyshevOfFourier };

inline constexpr std::array<TransformPlane, 6> kAllPlanes{
    TransformPlane::Raw,       TransformPlane::FourierMagnitude, TransformPlane::Chebyshev,
    TransformPlane::WaveletLL, TransformPlane::FourierOfWavelet, TransformPlane::ChebyshevOfFourier};

std::string_view to_string(TransformPlane plane) noexcept;

struct CatalogEntry {
  std::string name;
  TransformPlane plane = TransformPlane::Raw;
  std::string family;
  int index = 0;  // position within the family block
};

struct FeatureCatalog {
  std::string version{kCatalogVersion};
  std::vector<CatalogEntry> entries;

  [[nodiscard]] std::size_t size() const noexcept { return entries.size(); }
  [[nodiscard]] std::vector<std::string> names() const;
};

/// The fixed 470-entry catalog (445 intensity + 25 shape features).
const FeatureCatalog& default_catalog();

using FeatureVector = std::vector<double>;

// --- transforms ---------------------------------------------------------

/// log(1 + |DFT|) with the DC term moved to the centre, not rescaled.
RealField fourier_log_magnitude(const Image& img);
/// 2-D Chebyshev coefficients c(i,j), i,j < order, stored at (x=i, y=j).
RealField chebyshev_coefficients(const Image& img, int order = kChebyshevOrder);
/// One-level Haar approximation band (2x2 block means), floor(w/2) x floor(h/2).
Image haar_approximation(const Image& img);
/// Applies the plane's transform chain; result rescaled to [0,1]. Needs >= 8x8.
Image transform_image(const Image& img, TransformPlane plane);

// --- intensity families -------------------------------------------------

/// mean, std, skewness, excess kurtosis, median. `mask` (optional) restricts
/// the pixels considered.
std::array<double, 5> pixel_statistics(const Image& img, const BinaryMask* mask = nullptr);
/// Normalized 3-, 5-, 7- and 9-bin histograms over [0,1], concatenated.
std::array<double, 24> multiscale_histograms(const Image& img);

inline constexpr std::array<std::string_view, 13> kHaralickNames{
    "asm",         "contrast",   "correlation",   "variance",        "idm",
    "sum_average", "sum_variance", "sum_entropy", "entropy",         "diff_variance",
    "diff_entropy", "info_corr1", "info_corr2"};

/// Symmetric normalized co-occurrence matrix for one offset (32 levels).
std::vector<double> glcm(const Image& img, int dx, int dy);
/// The 13 Haralick statistics of a normalized 32x32 co-occurrence matrix.
std::array<double, 13> haralick_statistics(const std::vector<double>& p);
/// Per-direction statistics for 0, 45, 90 and 135 degrees.
std::array<std::array<double, 13>, 4> haralick_directional(const Image& img);
/// Mean of each statistic across directions (13), then ranges (13).
std::array<double, 26> haralick_glcm(const Image& img);

/// coarseness, contrast, directionality. Needs >= 32x32.
std::array<double, 3> tamura_features(const Image& img);
/// 16-bin histogram of gradient orientations used by the directionality term.
std::array<double, 16> tamura_orientation_histogram(const Image& img);

/// |Z_nm| for n <= 8, m >= 0, n - m even (25 values, ordered by n then m).
std::array<double, 25> zernike_magnitudes(const Image& img);
/// 32-bin normalized histogram of the order-20 Chebyshev coefficients.
std::array<double, 32> chebyshev_coeff_histogram(const Image& img);
/// Sobel: edge fraction, mean magnitude, magnitude std, 4 orientation bins,
/// orientation homogeneity. Needs >= 3x3.
std::array<double, 8> edge_statistics(const Image& img);

// --- shape --------------------------------------------------------------

inline constexpr std::array<std::string_view, 25> kShapeNames{
    "area",      "perimeter",   "equiv_diameter", "major_axis", "minor_axis", "eccentricity", "orientation",
    "solidity",  "extent",      "convex_area",    "circularity", "aspect_ratio", "hu1",        "hu2",
    "hu3",       "hu4",         "hu5",            "hu6",        "hu7",         "fd1",          "fd2",
    "fd3",       "fd4",         "fd5",            "fd6"};

std::array<double, 25> shape_features(const BinaryMask& mask);

// --- aggregate ----------------------------------------------------------

/// Evaluates every catalog entry for one grain. Family failures and
/// non-finite values become 0 with a logged diagnostic.
FeatureVector extract_all(const seg::GrainRecord& rec, const FeatureCatalog& catalog = default_catalog());

/// Extracts many grains with `threads` workers; output order follows input.
std::vector<FeatureVector> extract_batch(const std::vector<seg::GrainRecord>& grains, int threads,
                                         const FeatureCatalog& catalog = default_catalog());

}  // namespace palyno::features
