#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace palyno {

enum class Errc {
  FileNotFound,
  UnsupportedFormat,
  CorruptData,
  OutOfBounds,
  ImageTooSmall,
  EmptyStack,
  DegenerateClustering,
  ContourCollapsed,
  EmptyMask,
  MultipleComponents,
  DegenerateImage,
  EmptyMatrix,
  DimensionMismatch,
  TooFewCategories,
  CountOutOfRange,
  UnknownCategory,
  EmptyNode,
  DegenerateData,
  NonConvergence,
  UntrainedModel,
  MissingProfile,
  InsufficientProfile,
  TooFewSamples,
  CategoryOverlap,
  IoError,
  SchemaMismatch,
  InvalidArgument,
};

std::string_view to_string(Errc code) noexcept;

/// Domain error raised by every pipeline stage. The code is stable and is
/// what callers branch on; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  [[nodiscard]] Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace palyno
