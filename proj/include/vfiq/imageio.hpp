#pragma once

#include <array>
#include <filesystem>

#include "vfiq/core.hpp"
#include "vfiq/tensor.hpp"

namespace vfiq {

/// Backbone input: the frame reflect-padded to multiples of 32 on the right
/// and bottom, then standardized per channel.
struct NormalizedTensor {
  FeatureMap map;

  int width() const { return map.width; }
  int height() const { return map.height; }
};

inline constexpr std::array<float, 3> kImageNetMean = {0.485f, 0.456f, 0.406f};
inline constexpr std::array<float, 3> kImageNetStd = {0.229f, 0.224f, 0.225f};

/// Decodes an 8- or 16-bit PNG (gray, RGB, RGBA, palette). Samples are
/// divided by 255 or 65535; alpha is dropped. Throws InputError.
Frame load_frame(const std::filesystem::path& path);

/// Encodes a frame as RGB PNG at the given bit depth (8 or 16), rounding to
/// the nearest code value.
void save_frame(const Frame& frame, const std::filesystem::path& path, int bit_depth = 8);

/// Smallest multiple of 32 that is >= n.
int padded_extent(int n);

NormalizedTensor to_model_input(const Frame& frame);

}  // namespace vfiq
