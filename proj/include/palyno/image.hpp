#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "palyno/error.hpp"

namespace palyno {

/// Dense row-major 2-D array. Used for images (values in [0,1]), masks
/// (0/1 bytes) and unconstrained real fields (gradients, GVF components).
template <class T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height), data_(checked_size(width, height), fill) {}
  Grid(int width, int height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (data_.size() != checked_size(width, height)) {
      throw Error(Errc::DimensionMismatch, "grid data length does not match width*height");
    }
  }

  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] int height() const noexcept { return height_; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

  [[nodiscard]] const T& operator()(int x, int y) const noexcept {
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  [[nodiscard]] T& operator()(int x, int y) noexcept {
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }

  [[nodiscard]] bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  [[nodiscard]] std::span<const T> values() const noexcept { return data_; }
  [[nodiscard]] std::span<T> values() noexcept { return data_; }
  [[nodiscard]] const std::vector<T>& vector() const noexcept { return data_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  static std::size_t checked_size(int width, int height) {
    if (width < 0 || height < 0) {
      throw Error(Errc::InvalidArgument, "negative grid dimension");
    }
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Grayscale intensities in [0,1].
using Image = Grid<double>;
/// Unconstrained real-valued field.
using RealField = Grid<double>;
/// Foreground = 1, background = 0.
using BinaryMask = Grid<std::uint8_t>;

struct ColorImage {
  int width = 0;
  int height = 0;
  std::vector<double> rgb;  // 3 * width * height, interleaved
};

struct BoundingBox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct FocalStack {
  std::vector<Image> planes;
  double plane_step = 1.0;  // micrometres between planes
};

/// Throws InvalidArgument unless every value is finite and inside [0,1].
void validate_image(const Image& img);
/// Builds an Image from arbitrary reals by clamping into [0,1] (NaN -> 0).
Image clamp_to_unit(RealField field);

ColorImage load_image(const std::filesystem::path& path);
Image load_grayscale(const std::filesystem::path& path);
void save_png(const std::filesystem::path& path, const Image& img);
void save_png(const std::filesystem::path& path, const ColorImage& img);
void save_mask_png(const std::filesystem::path& path, const BinaryMask& mask);
BinaryMask load_mask_png(const std::filesystem::path& path);

/// ITU-R BT.601 luminance.
Image to_grayscale(const ColorImage& img);

template <class T>
Grid<T> crop(const Grid<T>& img, const BoundingBox& box) {
  if (box.w < 1 || box.h < 1 || box.x < 0 || box.y < 0 || box.x + box.w > img.width() ||
      box.y + box.h > img.height()) {
    throw Error(Errc::OutOfBounds, "bounding box exceeds image bounds");
  }
  Grid<T> out(box.w, box.h);
  for (int j = 0; j < box.h; ++j) {
    for (int i = 0; i < box.w; ++i) out(i, j) = img(box.x + i, box.y + j);
  }
  return out;
}

template <class T>
Grid<T> transpose(const Grid<T>& img) {
  Grid<T> out(img.height(), img.width());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) out(y, x) = img(x, y);
  }
  return out;
}

/// 90 degree counter-clockwise rotation.
template <class T>
Grid<T> rotate90(const Grid<T>& img) {
  Grid<T> out(img.height(), img.width());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) out(y, img.width() - 1 - x) = img(x, y);
  }
  return out;
}

}  // namespace palyno
