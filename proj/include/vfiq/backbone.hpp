#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vfiq/core.hpp"
#include "vfiq/imageio.hpp"
#include "vfiq/tensor.hpp"

namespace vfiq {

inline constexpr int kNumStages = 6;

/// Stage 0 is the raw frame; stages 1..5 are backbone activations at
/// strides 2, 4, 8, 16, 32 of the padded input.
using FeatureStack = std::array<FeatureMap, kNumStages>;

inline constexpr const char* kResNet50Tag = "resnet50";
inline constexpr const char* kReferenceTag = "reference";
inline constexpr float kBatchNormEps = 1e-5f;

struct BackboneWeights {
  std::string architecture;
  std::map<std::string, Tensor> tensors;

  const Tensor& at(const std::string& name) const;
  bool operator==(const BackboneWeights&) const = default;
};

/// Every tensor an architecture needs, with its exact shape, in a fixed order.
std::vector<std::pair<std::string, std::vector<std::size_t>>> required_tensors(
    const std::string& architecture);

/// Channel counts of stages 0..5 for an architecture.
std::array<int, kNumStages> stage_channels(const std::string& architecture);

/// Throws ModelError for an unknown architecture, a missing tensor, or a
/// shape mismatch (naming the tensor). Extra tensors are ignored.
void validate_weights(const BackboneWeights& weights);

/// VFIW container, little-endian: "VFIW", u8 version (1), u16 tag length +
/// tag, u32 tensor count, then per tensor u16 name length + name, u8 ndim,
/// u64 dims, float32 payload. Tensors are written in name order.
BackboneWeights load_weights(const std::filesystem::path& path);
void save_weights(const BackboneWeights& weights, const std::filesystem::path& path);
BackboneWeights parse_weights(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> serialize_weights(const BackboneWeights& weights);

/// Small deterministic stand-in for ResNet-50 with stage channels
/// (3, 8, 16, 32, 64, 128). Each stage is a 3x3 stride-2 convolution with bias
/// followed by ReLU; weights and biases are SplitMix64(seed) draws in
/// [-1, 1) scaled by 1/sqrt(fan_in).
BackboneWeights reference_backbone(std::uint64_t seed);

// Inference primitives. All operate on planar float32 maps.

/// Cross-correlation with zero padding. kernel shape (out, in, kh, kw);
/// bias is empty or one value per output channel.
FeatureMap conv2d(const FeatureMap& input, const Tensor& kernel, int stride, int padding,
                  std::span<const float> bias = {});

FeatureMap batch_norm_inference(const FeatureMap& input, std::span<const float> mean,
                                std::span<const float> var, std::span<const float> gamma,
                                std::span<const float> beta, float eps = kBatchNormEps);

/// Padded positions never win the maximum.
FeatureMap max_pool(const FeatureMap& input, int kernel = 3, int stride = 2, int padding = 1);

void relu_inplace(FeatureMap& map);

/// Weights prepared for inference (batch norm folded into scale and shift).
/// Immutable after construction; extract() may be called concurrently.
class Backbone {
 public:
  explicit Backbone(const BackboneWeights& weights);
  ~Backbone();
  Backbone(Backbone&&) noexcept;
  Backbone& operator=(Backbone&&) noexcept;

  const std::string& architecture() const { return architecture_; }

  FeatureStack extract(const NormalizedTensor& input, const Frame& raw) const;

  /// Convenience: to_model_input + extract.
  FeatureStack extract(const Frame& raw) const;

 private:
  struct Impl;
  std::string architecture_;
  std::unique_ptr<Impl> impl_;
};

FeatureStack extract_features(const NormalizedTensor& input, const Frame& raw,
                              const BackboneWeights& weights);

/// Number of worker threads used inside convolutions (1 = serial). Output is
/// identical for every setting since each output channel is owned by one
/// worker and summed in a fixed order.
void set_inference_threads(int threads);
int inference_threads();

}  // namespace vfiq
