#pragma once

#include <string>
#include <utility>
#include <vector>

#include "palyno/image.hpp"

namespace palyno::seg {

/// Coarse (clustering + morphology) stage parameters.
struct CoarseParams {
  int clahe_tiles = 8;
  double clahe_clip = 0.01;  // normalized clip limit in [0,1]
  int median_radius = 2;
  int struct_radius = 5;
  int min_area = 500;
  int max_area = 0;  // 0 means 40% of the image area
  double border_interior_fraction = 0.8;

  void validate() const;
  [[nodiscard]] int resolved_max_area(int image_area) const;
};

/// Fine (GVF snake) stage parameters.
struct SnakeParams {
  int subsample_stride = 20;
  int iterations = 100;
  double gvf_mu = 0.2;
  int gvf_iterations = 80;
  double alpha = 0.1;   // tension
  double beta = 0.5;    // thin plate
  double balloon = 0.05;
  double time_step = 0.5;
  double edge_sigma = 0.5;       // Gaussian pre-smoothing of the edge map
  double external_weight = 1.0;  // GVF force gain
  double force_softening = 0.3;  // fraction of max |GVF| used to saturate the force
  double point_spacing = 1.5;    // resampling distance along the contour (px)
  int resample_every = 10;       // iterations between arc-length resamplings

  void validate() const;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

/// Closed polygon; the last point connects back to the first.
struct Contour {
  std::vector<Point2> points;
};

struct VectorField {
  RealField u;
  RealField v;
};

struct Component {
  BoundingBox box;
  BinaryMask mask;  // box-sized, only this component's pixels set
};

struct GrainRecord {
  std::string source_id;
  BoundingBox box;
  Image image;
  BinaryMask mask;
  Image masked_image;
};

// Coarse stage
Image clahe(const Image& img, int tiles, double clip);
Image median_filter(const Image& img, int radius);
Image preprocess(const Image& img, const CoarseParams& p);
BinaryMask kmeans_binary(const Image& img);
BinaryMask fill_holes(const BinaryMask& mask);
BinaryMask erode(const BinaryMask& mask, int radius);
BinaryMask dilate(const BinaryMask& mask, int radius);
BinaryMask morph_open_close(const BinaryMask& mask, int radius);
std::vector<Component> extract_components(const BinaryMask& mask, const CoarseParams& p);

/// Labels 4-connected foreground components (0 = background, 1..n in raster
/// order of first pixel). Returns the number of components.
int label_components(const BinaryMask& mask, Grid<int>& labels);
/// Keeps only the largest 4-connected component (lowest label on ties).
BinaryMask largest_component(const BinaryMask& mask);

// Fine stage
VectorField gvf_field(const Image& img, const SnakeParams& p);
/// Outer boundary of the first foreground component (Moore tracing, clockwise).
Contour trace_boundary(const BinaryMask& mask);
Contour subsample_contour(const Contour& c, int stride);
/// Equally spaced points along the closed polyline.
Contour resample_contour(const Contour& c, double spacing);
Contour snake_refine(const Image& img, const Contour& init, const SnakeParams& p);
/// Even-odd fill of pixel centres after rounding vertices half away from zero.
BinaryMask rasterize(const Contour& c, int width, int height);

double mask_iou(const BinaryMask& a, const BinaryMask& b);
std::size_t mask_area(const BinaryMask& mask);

/// Result of the coarse stage alone, kept for diagnostics and evaluation.
struct CoarseResult {
  Image preprocessed;
  BinaryMask mask;  // after K-Means, hole filling and open/close
  std::vector<Component> components;
};
CoarseResult coarse_stage(const Image& img, const CoarseParams& cp);

std::vector<GrainRecord> segment_grains(const Image& img, const CoarseParams& cp,
                                        const SnakeParams& sp, const std::string& source_id = {});

}  // namespace palyno::seg
