#include "palyno/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace palyno {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::FileNotFound: return "FileNotFound";
    case Errc::UnsupportedFormat: return "UnsupportedFormat";
    case Errc::CorruptData: return "CorruptData";
    case Errc::OutOfBounds: return "OutOfBounds";
    case Errc::ImageTooSmall: return "ImageTooSmall";
    case Errc::EmptyStack: return "EmptyStack";
    case Errc::DegenerateClustering: return "DegenerateClustering";
    case Errc::ContourCollapsed: return "ContourCollapsed";
    case Errc::EmptyMask: return "EmptyMask";
    case Errc::MultipleComponents: return "MultipleComponents";
    case Errc::DegenerateImage: return "DegenerateImage";
    case Errc::EmptyMatrix: return "EmptyMatrix";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::TooFewCategories: return "TooFewCategories";
    case Errc::CountOutOfRange: return "CountOutOfRange";
    case Errc::UnknownCategory: return "UnknownCategory";
    case Errc::EmptyNode: return "EmptyNode";
    case Errc::DegenerateData: return "DegenerateData";
    case Errc::NonConvergence: return "NonConvergence";
    case Errc::UntrainedModel: return "UntrainedModel";
    case Errc::MissingProfile: return "MissingProfile";
    case Errc::InsufficientProfile: return "InsufficientProfile";
    case Errc::TooFewSamples: return "TooFewSamples";
    case Errc::CategoryOverlap: return "CategoryOverlap";
    case Errc::IoError: return "IoError";
    case Errc::SchemaMismatch: return "SchemaMismatch";
    case Errc::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

void validate_image(const Image& img) {
  for (double v : img.values()) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw Error(Errc::InvalidArgument, "image intensity outside [0,1]");
    }
  }
}

Image clamp_to_unit(RealField field) {
  for (double& v : field.values()) v = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
  return field;
}

namespace {

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::ranges::transform(ext, ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

cv::Mat read_raw(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error(Errc::FileNotFound, path.string());
  }
  const std::string ext = lower_extension(path);
  if (ext != ".png" && ext != ".tif" && ext != ".tiff") {
    throw Error(Errc::UnsupportedFormat, path.string() + " (expected .png, .tif or .tiff)");
  }
  cv::Mat mat;
  try {
    mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED | cv::IMREAD_ANYDEPTH);
  } catch (const cv::Exception& e) {
    throw Error(Errc::CorruptData, path.string() + ": " + e.what());
  }
  if (mat.empty()) {
    throw Error(Errc::CorruptData, path.string() + " could not be decoded");
  }
  if (mat.depth() != CV_8U && mat.depth() != CV_16U) {
    throw Error(Errc::UnsupportedFormat, path.string() + " is neither 8-bit nor 16-bit");
  }
  return mat;
}

double channel_scale(const cv::Mat& mat) { return mat.depth() == CV_8U ? 255.0 : 65535.0; }

double sample(const cv::Mat& mat, int y, int x, int c) {
  if (mat.depth() == CV_8U) return mat.ptr<std::uint8_t>(y)[x * mat.channels() + c];
  return mat.ptr<std::uint16_t>(y)[x * mat.channels() + c];
}

void write_mat(const std::filesystem::path& path, const cv::Mat& mat) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), mat);
  } catch (const cv::Exception& e) {
    throw Error(Errc::IoError, path.string() + ": " + e.what());
  }
  if (!ok) throw Error(Errc::IoError, "cannot write " + path.string());
}

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

ColorImage load_image(const std::filesystem::path& path) {
  const cv::Mat mat = read_raw(path);
  const double scale = channel_scale(mat);
  ColorImage out{mat.cols, mat.rows, std::vector<double>(3u * mat.cols * mat.rows)};
  for (int y = 0; y < mat.rows; ++y) {
    for (int x = 0; x < mat.cols; ++x) {
      double* px = &out.rgb[3u * (static_cast<std::size_t>(y) * mat.cols + x)];
      if (mat.channels() < 3) {
        px[0] = px[1] = px[2] = sample(mat, y, x, 0) / scale;
      } else {
        // OpenCV stores BGR(A)
        px[0] = sample(mat, y, x, 2) / scale;
        px[1] = sample(mat, y, x, 1) / scale;
        px[2] = sample(mat, y, x, 0) / scale;
      }
    }
  }
  return out;
}

Image load_grayscale(const std::filesystem::path& path) {
  const cv::Mat mat = read_raw(path);
  if (mat.channels() >= 3) return to_grayscale(load_image(path));
  const double scale = channel_scale(mat);
  Image out(mat.cols, mat.rows);
  for (int y = 0; y < mat.rows; ++y) {
    for (int x = 0; x < mat.cols; ++x) out(x, y) = sample(mat, y, x, 0) / scale;
  }
  return out;
}

Image to_grayscale(const ColorImage& img) {
  Image out(img.width, img.height);
  auto values = out.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = 0.299 * img.rgb[3 * i] + 0.587 * img.rgb[3 * i + 1] + 0.114 * img.rgb[3 * i + 2];
    values[i] = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

void save_png(const std::filesystem::path& path, const Image& img) {
  cv::Mat mat(img.height(), img.width(), CV_8UC1);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) mat.at<std::uint8_t>(y, x) = quantize(img(x, y));
  }
  write_mat(path, mat);
}

void save_png(const std::filesystem::path& path, const ColorImage& img) {
  cv::Mat mat(img.height, img.width, CV_8UC3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double* px = &img.rgb[3u * (static_cast<std::size_t>(y) * img.width + x)];
      mat.at<cv::Vec3b>(y, x) = cv::Vec3b(quantize(px[2]), quantize(px[1]), quantize(px[0]));
    }
  }
  write_mat(path, mat);
}

void save_mask_png(const std::filesystem::path& path, const BinaryMask& mask) {
  cv::Mat mat(mask.height(), mask.width(), CV_8UC1);
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) mat.at<std::uint8_t>(y, x) = mask(x, y) ? 255 : 0;
  }
  write_mat(path, mat);
}

BinaryMask load_mask_png(const std::filesystem::path& path) {
  const Image gray = load_grayscale(path);
  BinaryMask mask(gray.width(), gray.height());
  for (std::size_t i = 0; i < gray.size(); ++i) mask.values()[i] = gray.values()[i] >= 0.5 ? 1 : 0;
  return mask;
}

}  // namespace palyno
