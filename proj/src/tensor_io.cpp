#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include "vfiq/backbone.hpp"
#include "vfiq/errors.hpp"
#include "vfiq/golden.hpp"
#include "vfiq/tensor.hpp"

namespace vfiq {

FeatureMap::FeatureMap(int c, int h, int w, float fill)
    : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

FeatureMap::FeatureMap(int c, int h, int w, std::vector<float> values)
    : channels(c), height(h), width(w), data(std::move(values)) {
  if (data.size() != static_cast<std::size_t>(c) * h * w) {
    throw InputError("feature map data size does not match " + shape_string());
  }
}

FeatureMap FeatureMap::from_frame(const Frame& frame) {
  return FeatureMap(Frame::kChannels, frame.height(), frame.width(), frame.data());
}

std::string FeatureMap::shape_string() const {
  return "(" + std::to_string(channels) + "," + std::to_string(height) + "," +
         std::to_string(width) + ")";
}

std::size_t Tensor::numel() const {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "VFIW reader assumes a little-endian host");

constexpr char kMagic[4] = {'V', 'F', 'I', 'W'};
constexpr std::uint8_t kVersion = 1;

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, const char* kind) : bytes_(bytes), kind_(kind) {}

  template <typename T>
  T get(const char* what) {
    T value;
    take(&value, sizeof(T), what);
    return value;
  }

  std::string get_string(std::size_t n, const char* what) {
    std::string s(n, '\0');
    take(s.data(), n, what);
    return s;
  }

  void take(void* dst, std::size_t n, const char* what) {
    if (n > bytes_.size() - pos_) {
      throw ModelError(std::string("truncated ") + kind_ + " while reading " + what);
    }
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  const char* kind_;
  std::size_t pos_ = 0;
};

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

}  // namespace

BackboneWeights parse_weights(std::span<const std::uint8_t> bytes) {
  Reader in(bytes, "weight file");
  char magic[4];
  in.take(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw ModelError("not a VFIW file (bad magic)");
  const auto version = in.get<std::uint8_t>("version");
  if (version != kVersion) {
    throw ModelError("unsupported VFIW version " + std::to_string(version));
  }

  BackboneWeights w;
  w.architecture = in.get_string(in.get<std::uint16_t>("tag length"), "architecture tag");
  const auto count = in.get<std::uint32_t>("tensor count");
  for (std::uint32_t t = 0; t < count; ++t) {
    std::string name = in.get_string(in.get<std::uint16_t>("name length"), "tensor name");
    Tensor tensor;
    const auto ndim = in.get<std::uint8_t>("ndim");
    std::size_t numel = 1;
    for (int d = 0; d < ndim; ++d) {
      const auto dim = in.get<std::uint64_t>("tensor dims");
      if (dim != 0 && numel > in.remaining() / dim) {
        throw ModelError("truncated weight file: tensor " + name + " larger than payload");
      }
      tensor.shape.push_back(static_cast<std::size_t>(dim));
      numel *= static_cast<std::size_t>(dim);
    }
    if (numel > in.remaining() / sizeof(float)) {
      throw ModelError("truncated weight file in payload of " + name);
    }
    tensor.data.resize(numel);
    in.take(tensor.data.data(), numel * sizeof(float), "tensor payload");
    if (!w.tensors.emplace(name, std::move(tensor)).second) {
      throw ModelError("duplicate tensor " + name);
    }
  }
  validate_weights(w);
  return w;
}

std::vector<std::uint8_t> serialize_weights(const BackboneWeights& weights) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put<std::uint8_t>(out, kVersion);
  put<std::uint16_t>(out, static_cast<std::uint16_t>(weights.architecture.size()));
  out.insert(out.end(), weights.architecture.begin(), weights.architecture.end());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(weights.tensors.size()));
  for (const auto& [name, tensor] : weights.tensors) {  // std::map: sorted by name
    put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put<std::uint8_t>(out, static_cast<std::uint8_t>(tensor.shape.size()));
    for (auto d : tensor.shape) put<std::uint64_t>(out, d);
    const auto* p = reinterpret_cast<const std::uint8_t*>(tensor.data.data());
    out.insert(out.end(), p, p + tensor.data.size() * sizeof(float));
  }
  return out;
}

BackboneWeights load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("cannot open weight file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse_weights(bytes);
}

void save_weights(const BackboneWeights& weights, const std::filesystem::path& path) {
  const auto bytes = serialize_weights(weights);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ModelError("cannot write weight file " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

namespace {

constexpr char kGoldenMagic[4] = {'V', 'F', 'I', 'G'};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path, const char* kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError(std::string("cannot open ") + kind + " " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

GoldenActivations parse_golden(std::span<const std::uint8_t> bytes) {
  Reader in(bytes, "golden file");
  char magic[4];
  in.take(magic, 4, "magic");
  if (std::memcmp(magic, kGoldenMagic, 4) != 0) throw ModelError("not a golden activation file (bad magic)");
  const auto version = in.get<std::uint8_t>("version");
  if (version != kVersion) throw ModelError("unsupported golden file version " + std::to_string(version));

  GoldenActivations g;
  const auto count = in.get<std::uint32_t>("record count");
  for (std::uint32_t r = 0; r < count; ++r) {
    const int stage = in.get<std::uint8_t>("stage index");
    if (stage >= kNumStages) throw ModelError("golden record for unknown stage " + std::to_string(stage));
    const auto ndim = in.get<std::uint8_t>("ndim");
    if (ndim != 3) throw ModelError("golden stage " + std::to_string(stage) + " must be (C, H, W)");
    std::array<std::uint64_t, 3> dims{};
    for (auto& d : dims) d = in.get<std::uint64_t>("dims");
    const std::uint64_t limit = in.remaining() / sizeof(float);
    if (dims[0] == 0 || dims[1] == 0 || dims[2] == 0 || dims[0] > limit || dims[1] > limit / dims[0] ||
        dims[2] > limit / (dims[0] * dims[1])) {
      throw ModelError("golden stage " + std::to_string(stage) + " has a bad or truncated payload");
    }
    FeatureMap map(static_cast<int>(dims[0]), static_cast<int>(dims[1]), static_cast<int>(dims[2]));
    in.take(map.data.data(), map.data.size() * sizeof(float), "payload");
    if (!g.stages.emplace(stage, std::move(map)).second) {
      throw ModelError("duplicate golden record for stage " + std::to_string(stage));
    }
  }
  if (in.remaining() != 0) throw ModelError("trailing bytes after golden records");
  return g;
}

std::vector<std::uint8_t> serialize_golden(const GoldenActivations& golden) {
  std::vector<std::uint8_t> out(std::begin(kGoldenMagic), std::end(kGoldenMagic));
  put<std::uint8_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(golden.stages.size()));
  for (const auto& [stage, map] : golden.stages) {
    put<std::uint8_t>(out, static_cast<std::uint8_t>(stage));
    put<std::uint8_t>(out, 3);
    put<std::uint64_t>(out, static_cast<std::uint64_t>(map.channels));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(map.height));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(map.width));
    const auto* p = reinterpret_cast<const std::uint8_t*>(map.data.data());
    out.insert(out.end(), p, p + map.data.size() * sizeof(float));
  }
  return out;
}

GoldenActivations load_golden(const std::filesystem::path& path) {
  return parse_golden(read_file(path, "golden file"));
}

void save_golden(const GoldenActivations& golden, const std::filesystem::path& path) {
  const auto bytes = serialize_golden(golden);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ModelError("cannot write golden file " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

GoldenActivations golden_from_stack(const FeatureStack& stack, int first_stage) {
  GoldenActivations g;
  for (int i = first_stage; i < kNumStages; ++i) g.stages.emplace(i, stack[i]);
  return g;
}

ParityReport compare_to_golden(const FeatureStack& stack, const GoldenActivations& golden,
                               double tolerance) {
  if (golden.stages.empty()) throw ModelError("golden file has no stages");
  ParityReport report;
  report.tolerance = tolerance;
  report.passed = true;
  for (const auto& [stage, expected] : golden.stages) {
    const FeatureMap& got = stack[stage];
    if (!got.same_shape(expected)) {
      throw ModelError("stage " + std::to_string(stage) + " shape " + got.shape_string() +
                       " does not match golden " + expected.shape_string());
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < got.data.size(); ++i) {
      const double d = std::abs(static_cast<double>(got.data[i]) - expected.data[i]);
      if (!(d <= worst)) worst = d;  // NaN propagates as a failure
    }
    report.stages.push_back({stage, worst, worst <= tolerance});
    report.passed = report.passed && worst <= tolerance;
  }
  return report;
}

}  // namespace vfiq
