#include "vfiq/backbone.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <optional>
#include <thread>

#include "vfiq/errors.hpp"
#include "vfiq/prng.hpp"

namespace vfiq {

namespace {

std::atomic<int> g_threads{1};

template <typename Fn>
void parallel_for(int n, Fn&& fn) {
  const int workers = std::min(g_threads.load(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

struct ResNetLayer {
  int blocks;
  int planes;
  int stride;
};
constexpr ResNetLayer kResNet50Layers[4] = {{3, 64, 1}, {4, 128, 2}, {6, 256, 2}, {3, 512, 2}};
constexpr int kExpansion = 4;
constexpr std::array<int, kNumStages> kResNet50Channels = {3, 64, 256, 512, 1024, 2048};
constexpr std::array<int, kNumStages> kReferenceChannels = {3, 8, 16, 32, 64, 128};

using Shape = std::vector<std::size_t>;
using TensorSpec = std::vector<std::pair<std::string, Shape>>;

void add_bn(TensorSpec& spec, const std::string& prefix, std::size_t channels) {
  for (const char* p : {"gamma", "beta", "mean", "var"}) spec.emplace_back(prefix + "." + p, Shape{channels});
}

std::string block_prefix(int layer, int block) {
  return "layer" + std::to_string(layer) + "." + std::to_string(block);
}

// Accumulates one input plane convolved with one K x K kernel slice into an
// output plane. Per output element the additions happen in (ky, kx) order.
void accumulate_plane(const float* in, int h, int w, const float* kernel, int k, int stride,
                      int pad, float* out, int oh, int ow) {
  for (int ky = 0; ky < k; ++ky) {
    for (int kx = 0; kx < k; ++kx) {
      const float wv = kernel[ky * k + kx];
      const int lo_num = pad - kx;
      const int ox_lo = lo_num <= 0 ? 0 : (lo_num + stride - 1) / stride;
      const int hi_num = w - 1 + pad - kx;
      if (hi_num < 0) continue;
      const int ox_hi = std::min(ow, hi_num / stride + 1);
      if (ox_lo >= ox_hi) continue;
      for (int oy = 0; oy < oh; ++oy) {
        const int iy = oy * stride - pad + ky;
        if (iy < 0 || iy >= h) continue;
        const float* row = in + static_cast<std::size_t>(iy) * w + (ox_lo * stride - pad + kx);
        float* orow = out + static_cast<std::size_t>(oy) * ow;
        if (stride == 1) {
          for (int ox = ox_lo; ox < ox_hi; ++ox) orow[ox] += wv * row[ox - ox_lo];
        } else {
          for (int ox = ox_lo; ox < ox_hi; ++ox) orow[ox] += wv * row[(ox - ox_lo) * stride];
        }
      }
    }
  }
}

void check_kernel(const FeatureMap& input, const Tensor& kernel) {
  if (kernel.shape.size() != 4 || kernel.shape[2] != kernel.shape[3]) {
    throw ModelError("convolution kernel must have shape (out, in, k, k), got " +
                     shape_string(kernel.shape));
  }
  if (static_cast<int>(kernel.shape[1]) != input.channels) {
    throw ModelError("kernel expects " + std::to_string(kernel.shape[1]) +
                     " input channels, map has " + std::to_string(input.channels));
  }
}

// Convolution followed by y = scale * acc + shift per output channel, and an
// optional ReLU. Empty scale means 1, empty shift means 0.
FeatureMap conv_affine(const FeatureMap& input, const Tensor& kernel, int stride, int pad,
                       std::span<const float> scale, std::span<const float> shift, bool relu) {
  check_kernel(input, kernel);
  const int out_c = static_cast<int>(kernel.shape[0]);
  const int k = static_cast<int>(kernel.shape[2]);
  const int oh = (input.height + 2 * pad - k) / stride + 1;
  const int ow = (input.width + 2 * pad - k) / stride + 1;
  if (oh <= 0 || ow <= 0) throw InputError("convolution input smaller than kernel");
  FeatureMap out(out_c, oh, ow);
  const std::size_t kernel_slice = static_cast<std::size_t>(k) * k;

  parallel_for(out_c, [&](int oc) {
    float* dst = out.channel(oc).data();
    for (int ic = 0; ic < input.channels; ++ic) {
      const float* wk = kernel.data.data() + (static_cast<std::size_t>(oc) * input.channels + ic) * kernel_slice;
      accumulate_plane(input.channel(ic).data(), input.height, input.width, wk, k, stride, pad, dst,
                       oh, ow);
    }
    const float s = scale.empty() ? 1.0f : scale[oc];
    const float b = shift.empty() ? 0.0f : shift[oc];
    const std::size_t n = out.plane_size();
    if (!scale.empty()) {
      for (std::size_t i = 0; i < n; ++i) dst[i] = s * dst[i] + b;
    } else if (!shift.empty()) {
      for (std::size_t i = 0; i < n; ++i) dst[i] += b;
    }
    if (relu) {
      for (std::size_t i = 0; i < n; ++i) dst[i] = std::max(dst[i], 0.0f);
    }
  });
  return out;
}

// Conv + folded batch norm.
struct ConvBn {
  Tensor kernel;
  std::vector<float> scale;
  std::vector<float> shift;
  int stride = 1;
  int pad = 0;

  FeatureMap operator()(const FeatureMap& x, bool relu) const {
    return conv_affine(x, kernel, stride, pad, scale, shift, relu);
  }
};

ConvBn make_conv_bn(const BackboneWeights& w, const std::string& conv_name,
                    const std::string& bn_prefix, int stride, int pad) {
  ConvBn c;
  c.kernel = w.at(conv_name);
  c.stride = stride;
  c.pad = pad;
  const auto& gamma = w.at(bn_prefix + ".gamma").data;
  const auto& beta = w.at(bn_prefix + ".beta").data;
  const auto& mean = w.at(bn_prefix + ".mean").data;
  const auto& var = w.at(bn_prefix + ".var").data;
  c.scale.resize(gamma.size());
  c.shift.resize(gamma.size());
  for (std::size_t i = 0; i < gamma.size(); ++i) {
    const double s = gamma[i] / std::sqrt(static_cast<double>(var[i]) + kBatchNormEps);
    c.scale[i] = static_cast<float>(s);
    c.shift[i] = static_cast<float>(beta[i] - mean[i] * s);
  }
  return c;
}

struct Bottleneck {
  ConvBn reduce;
  ConvBn spatial;
  ConvBn expand;
  std::optional<ConvBn> downsample;

  FeatureMap operator()(const FeatureMap& x) const {
    FeatureMap y = expand(spatial(reduce(x, true), true), false);
    const FeatureMap shortcut = downsample ? (*downsample)(x, false) : FeatureMap();
    const FeatureMap& identity = downsample ? shortcut : x;
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] = std::max(y.data[i] + identity.data[i], 0.0f);
    return y;
  }
};

}  // namespace

const Tensor& BackboneWeights::at(const std::string& name) const {
  const auto it = tensors.find(name);
  if (it == tensors.end()) throw ModelError("missing tensor " + name);
  return it->second;
}

std::vector<std::pair<std::string, std::vector<std::size_t>>> required_tensors(
    const std::string& architecture) {
  TensorSpec spec;
  if (architecture == kResNet50Tag) {
    spec.emplace_back("conv1.weight", Shape{64, 3, 7, 7});
    add_bn(spec, "bn1", 64);
    std::size_t in = 64;
    for (int l = 0; l < 4; ++l) {
      const auto planes = static_cast<std::size_t>(kResNet50Layers[l].planes);
      const std::size_t out = planes * kExpansion;
      for (int b = 0; b < kResNet50Layers[l].blocks; ++b) {
        const std::string p = block_prefix(l + 1, b);
        const std::size_t block_in = b == 0 ? in : out;
        spec.emplace_back(p + ".conv1.weight", Shape{planes, block_in, 1, 1});
        add_bn(spec, p + ".bn1", planes);
        spec.emplace_back(p + ".conv2.weight", Shape{planes, planes, 3, 3});
        add_bn(spec, p + ".bn2", planes);
        spec.emplace_back(p + ".conv3.weight", Shape{out, planes, 1, 1});
        add_bn(spec, p + ".bn3", out);
        if (b == 0) {
          spec.emplace_back(p + ".downsample.conv.weight", Shape{out, block_in, 1, 1});
          add_bn(spec, p + ".downsample.bn", out);
        }
      }
      in = out;
    }
  } else if (architecture == kReferenceTag) {
    for (int s = 1; s < kNumStages; ++s) {
      const auto c_in = static_cast<std::size_t>(kReferenceChannels[s - 1]);
      const auto c_out = static_cast<std::size_t>(kReferenceChannels[s]);
      spec.emplace_back("stage" + std::to_string(s) + ".weight", Shape{c_out, c_in, 3, 3});
      spec.emplace_back("stage" + std::to_string(s) + ".bias", Shape{c_out});
    }
  } else {
    throw ModelError("unknown backbone architecture '" + architecture + "'");
  }
  return spec;
}

std::array<int, kNumStages> stage_channels(const std::string& architecture) {
  if (architecture == kResNet50Tag) return kResNet50Channels;
  if (architecture == kReferenceTag) return kReferenceChannels;
  throw ModelError("unknown backbone architecture '" + architecture + "'");
}

void validate_weights(const BackboneWeights& weights) {
  for (const auto& [name, shape] : required_tensors(weights.architecture)) {
    const auto it = weights.tensors.find(name);
    if (it == weights.tensors.end()) throw ModelError("missing tensor " + name);
    if (it->second.shape != shape) {
      throw ModelError("shape mismatch for " + name + ": expected " + shape_string(shape) +
                       ", got " + shape_string(it->second.shape));
    }
    if (it->second.data.size() != it->second.numel()) {
      throw ModelError("payload size mismatch for " + name);
    }
  }
}

BackboneWeights reference_backbone(std::uint64_t seed) {
  BackboneWeights w;
  w.architecture = kReferenceTag;
  SplitMix64 rng(seed);
  for (const auto& [name, shape] : required_tensors(kReferenceTag)) {
    Tensor t;
    t.shape = shape;
    t.data.resize(t.numel());
    // Both tensors of a stage use the stage's convolution fan-in.
    const int stage = name[5] - '0';
    const double fan_in = 9.0 * kReferenceChannels[stage - 1];
    const double bound = 1.0 / std::sqrt(fan_in);
    for (auto& v : t.data) v = static_cast<float>(rng.uniform(-1.0, 1.0) * bound);
    w.tensors.emplace(name, std::move(t));
  }
  return w;
}

FeatureMap conv2d(const FeatureMap& input, const Tensor& kernel, int stride, int padding,
                  std::span<const float> bias) {
  if (!bias.empty()) {
    check_kernel(input, kernel);
    if (bias.size() != kernel.shape[0]) throw ModelError("bias length does not match kernel");
  }
  if (stride < 1 || padding < 0) throw InputError("invalid stride or padding");
  return conv_affine(input, kernel, stride, padding, {}, bias, false);
}

FeatureMap batch_norm_inference(const FeatureMap& input, std::span<const float> mean,
                                std::span<const float> var, std::span<const float> gamma,
                                std::span<const float> beta, float eps) {
  const auto c = static_cast<std::size_t>(input.channels);
  if (mean.size() != c || var.size() != c || gamma.size() != c || beta.size() != c) {
    throw ModelError("batch norm parameter length does not match channel count " +
                     std::to_string(c));
  }
  FeatureMap out = input;
  for (int ch = 0; ch < input.channels; ++ch) {
    const float denom = std::sqrt(var[ch] + eps);
    for (float& v : out.channel(ch)) v = gamma[ch] * (v - mean[ch]) / denom + beta[ch];
  }
  return out;
}

FeatureMap max_pool(const FeatureMap& input, int kernel, int stride, int padding) {
  const int oh = (input.height + 2 * padding - kernel) / stride + 1;
  const int ow = (input.width + 2 * padding - kernel) / stride + 1;
  FeatureMap out(input.channels, oh, ow);
  for (int c = 0; c < input.channels; ++c) {
    for (int oy = 0; oy < oh; ++oy) {
      const int y0 = std::max(oy * stride - padding, 0);
      const int y1 = std::min(oy * stride - padding + kernel, input.height);
      for (int ox = 0; ox < ow; ++ox) {
        const int x0 = std::max(ox * stride - padding, 0);
        const int x1 = std::min(ox * stride - padding + kernel, input.width);
        float best = -std::numeric_limits<float>::infinity();
        for (int y = y0; y < y1; ++y) {
          for (int x = x0; x < x1; ++x) best = std::max(best, input.at(c, y, x));
        }
        out.at(c, oy, ox) = best;
      }
    }
  }
  return out;
}

void relu_inplace(FeatureMap& map) {
  for (float& v : map.data) v = std::max(v, 0.0f);
}

struct Backbone::Impl {
  // resnet50
  ConvBn stem;
  std::array<std::vector<Bottleneck>, 4> layers;
  // reference
  std::array<Tensor, kNumStages> ref_kernels;
  std::array<std::vector<float>, kNumStages> ref_bias;
};

Backbone::Backbone(const BackboneWeights& weights)
    : architecture_(weights.architecture), impl_(std::make_unique<Impl>()) {
  validate_weights(weights);
  if (architecture_ == kResNet50Tag) {
    impl_->stem = make_conv_bn(weights, "conv1.weight", "bn1", 2, 3);
    for (int l = 0; l < 4; ++l) {
      for (int b = 0; b < kResNet50Layers[l].blocks; ++b) {
        const std::string p = block_prefix(l + 1, b);
        const int stride = b == 0 ? kResNet50Layers[l].stride : 1;
        Bottleneck block;
        block.reduce = make_conv_bn(weights, p + ".conv1.weight", p + ".bn1", 1, 0);
        block.spatial = make_conv_bn(weights, p + ".conv2.weight", p + ".bn2", stride, 1);
        block.expand = make_conv_bn(weights, p + ".conv3.weight", p + ".bn3", 1, 0);
        if (b == 0) {
          block.downsample =
              make_conv_bn(weights, p + ".downsample.conv.weight", p + ".downsample.bn", stride, 0);
        }
        impl_->layers[l].push_back(std::move(block));
      }
    }
  } else {
    for (int s = 1; s < kNumStages; ++s) {
      impl_->ref_kernels[s] = weights.at("stage" + std::to_string(s) + ".weight");
      impl_->ref_bias[s] = weights.at("stage" + std::to_string(s) + ".bias").data;
    }
  }
}

Backbone::~Backbone() = default;
Backbone::Backbone(Backbone&&) noexcept = default;
Backbone& Backbone::operator=(Backbone&&) noexcept = default;

FeatureStack Backbone::extract(const NormalizedTensor& input, const Frame& raw) const {
  if (input.width() % 32 != 0 || input.height() % 32 != 0) {
    throw InputError("backbone input must have dimensions divisible by 32");
  }
  FeatureStack stack;
  stack[0] = FeatureMap::from_frame(raw);
  if (architecture_ == kResNet50Tag) {
    stack[1] = impl_->stem(input.map, true);
    FeatureMap x = max_pool(stack[1], 3, 2, 1);
    for (int l = 0; l < 4; ++l) {
      for (const auto& block : impl_->layers[l]) x = block(x);
      stack[l + 2] = x;
    }
  } else {
    const FeatureMap* prev = &input.map;
    for (int s = 1; s < kNumStages; ++s) {
      stack[s] = conv_affine(*prev, impl_->ref_kernels[s], 2, 1, {}, impl_->ref_bias[s], true);
      prev = &stack[s];
    }
  }
  return stack;
}

FeatureStack Backbone::extract(const Frame& raw) const { return extract(to_model_input(raw), raw); }

FeatureStack extract_features(const NormalizedTensor& input, const Frame& raw,
                              const BackboneWeights& weights) {
  return Backbone(weights).extract(input, raw);
}

void set_inference_threads(int threads) { g_threads = std::max(threads, 1); }
int inference_threads() { return g_threads.load(); }

}  // namespace vfiq
