#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "vfiq/core.hpp"

namespace vfiq {

/// Dense float32 feature map, planar: data[(c * height + y) * width + x].
struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  FeatureMap() = default;
  FeatureMap(int channels, int height, int width, float fill = 0.0f);
  FeatureMap(int channels, int height, int width, std::vector<float> values);

  static FeatureMap from_frame(const Frame& frame);

  std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }
  bool empty() const { return data.empty(); }

  std::span<float> channel(int c) { return {data.data() + c * plane_size(), plane_size()}; }
  std::span<const float> channel(int c) const {
    return {data.data() + c * plane_size(), plane_size()};
  }

  float& at(int c, int y, int x) { return data[(c * plane_size()) + y * width + x]; }
  float at(int c, int y, int x) const { return data[(c * plane_size()) + y * width + x]; }

  bool same_shape(const FeatureMap& other) const {
    return channels == other.channels && height == other.height && width == other.width;
  }
  std::string shape_string() const;
};

/// Named-weight payload: row-major float32 with an explicit shape.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<float> data;

  std::size_t numel() const;
  bool operator==(const Tensor&) const = default;
};

std::string shape_string(const std::vector<std::size_t>& shape);

}  // namespace vfiq
