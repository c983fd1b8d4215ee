#pragma once

#include <cstdint>
#include <vector>

#include "palyno/image.hpp"

namespace palyno::synth {

/// Appearance of one synthetic grain type.
struct TypeStyle {
  double radius_min = 20.0;
  double radius_max = 24.0;
  double elongation = 1.0;     // major/minor axis ratio
  int lobes = 0;               // harmonic boundary undulation count
  double lobe_amplitude = 0.0;  // relative radius modulation
  double interior = 0.45;      // mean interior intensity
  double rim = 0.25;           // exine rim intensity
  double rim_width = 3.0;      // px
  double stripe_frequency = 0.0;  // cycles per pixel, 0 disables
  double stripe_contrast = 0.0;
  double spot_density = 0.0;   // spots per 100 px^2 of grain area
  double spot_radius = 1.5;
  double spot_contrast = 0.0;  // signed; negative = dark spots
};

struct SynthConfig {
  int n_types = 5;
  int n_outlier_types = 2;
  int grains_per_type = 40;
  int planes = 31;
  int sharp_plane = 15;
  double blur_per_plane = 1.0;
  double psf_sigma = 1.0;       // optical softness of the in-focus edge
  int field_width = 144;
  int field_height = 144;
  int grains_per_field = 1;
  double background = 0.85;
  double noise_sigma = 0.01;
  double debris_density = 1.0;  // specks per 10^4 px
  double cluster_probability = 0.0;
  bool random_sharp_plane = false;  // draw sharp plane uniformly per stack
  std::uint64_t seed = 1;
  std::vector<TypeStyle> styles;  // empty: built-in table

  void validate() const;
  [[nodiscard]] TypeStyle style(int type_id) const;
};

/// Built-in style for a type index; indices >= n_types serve as outlier types.
TypeStyle default_style(int type_id);

struct GroundTruthGrain {
  int type_id = 0;
  BoundingBox box;
  BinaryMask mask;  // box-sized
};

struct SynthStack {
  FocalStack stack;
  Image clean;  // noise-free in-focus render
  int sharp_plane = 0;
  std::vector<GroundTruthGrain> grains;
  std::vector<BoundingBox> debris;
};

/// Renders one field containing grains of `type_id` (type_id < 0 draws a
/// random inlier type per grain) and returns the focal stack plus ground truth.
SynthStack synth_stack(const SynthConfig& cfg, int type_id, std::uint64_t seed);

/// Renders only the in-focus plane (clean + noise), skipping the stack.
SynthStack synth_field(const SynthConfig& cfg, int type_id, std::uint64_t seed);

/// Full-field ground-truth mask for grain k.
BinaryMask full_mask(const SynthStack& s, std::size_t k);

}  // namespace palyno::synth
