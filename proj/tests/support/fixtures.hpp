#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vfiq/backbone.hpp"
#include "vfiq/core.hpp"
#include "vfiq/prng.hpp"
#include "vfiq/trainer.hpp"

namespace vfiq::testing {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "vfiq");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Smooth random image: a few sinusoids plus uniform noise, in [0, 1].
Frame random_frame(SplitMix64& rng, int width, int height, double noise = 0.05);

/// Frame b blended with a shifted copy of a: a crude interpolation artifact
/// whose severity grows with `distortion` in [0, 1].
Frame distorted_copy(const Frame& a, SplitMix64& rng, double distortion);

/// ResNet-50 shaped weights with random values (not a trained network).
/// Batch norm statistics are drawn near identity so activations stay O(1).
BackboneWeights random_resnet50(std::uint64_t seed);

/// Random feature map with values uniform in [lo, hi).
FeatureMap random_map(SplitMix64& rng, int channels, int height, int width, double lo = -1.0,
                      double hi = 1.0);

FeatureStack random_stack(SplitMix64& rng, int channels, int height, int width);

/// Writes `n` synthetic triplets of size w x h into dir and returns a
/// manifest without MOS (ids t000, t001, ...). When with_reference is set,
/// each record also gets a ground-truth reference frame.
DatasetManifest write_synthetic_triplets(const std::filesystem::path& dir, int n, int w, int h,
                                         std::uint64_t seed, bool with_reference = false);

/// Writes raw PNG samples (big-endian for 16-bit). channels: 1 gray, 3 RGB,
/// 4 RGBA.
void write_raw_png(const std::filesystem::path& path, int width, int height, int bit_depth,
                   int channels, const std::vector<std::uint8_t>& bytes);

/// Table of `rows` rows with features uniform in [0.2, 1) and
/// mos = features . hidden + noise_sigma * N(0, 1).
SimilarityTable synthetic_table(SplitMix64& rng, int rows, const std::array<double, 12>& hidden,
                                double noise_sigma);

}  // namespace vfiq::testing
