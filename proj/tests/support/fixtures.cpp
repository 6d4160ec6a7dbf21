#include "fixtures.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cmath>
#include <numbers>

#include <png.h>

#include <stdexcept>

#include "vfiq/imageio.hpp"

namespace vfiq::testing {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

Frame random_frame(SplitMix64& rng, int width, int height, double noise) {
  std::vector<float> data(static_cast<std::size_t>(width) * height * 3);
  for (int c = 0; c < 3; ++c) {
    const double fx = rng.uniform(0.02, 0.2);
    const double fy = rng.uniform(0.02, 0.2);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double base = rng.uniform(0.3, 0.7);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        double v = base + 0.25 * std::sin(fx * x + fy * y + phase) + noise * rng.uniform(-1.0, 1.0);
        v = std::clamp(v, 0.0, 1.0);
        data[(static_cast<std::size_t>(c) * height + y) * width + x] = static_cast<float>(v);
      }
    }
  }
  return Frame(width, height, std::move(data));
}

Frame distorted_copy(const Frame& a, SplitMix64& rng, double distortion) {
  const int w = a.width();
  const int h = a.height();
  const int shift = 1 + static_cast<int>(distortion * 6.0);
  std::vector<float> data(a.data().size());
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const int sx = std::min(x + shift, w - 1);
        const double ghost = 0.5 * (a.at(c, y, x) + a.at(c, y, sx));
        double v = (1.0 - distortion) * a.at(c, y, x) + distortion * ghost +
                   0.2 * distortion * rng.uniform(-1.0, 1.0);
        data[(static_cast<std::size_t>(c) * h + y) * w + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return Frame(w, h, std::move(data));
}

BackboneWeights random_resnet50(std::uint64_t seed) {
  BackboneWeights w;
  w.architecture = kResNet50Tag;
  SplitMix64 rng(seed);
  for (const auto& [name, shape] : required_tensors(kResNet50Tag)) {
    Tensor t;
    t.shape = shape;
    t.data.resize(t.numel());
    const auto ends_with = [&](const char* suffix) {
      const std::string s(suffix);
      return name.size() >= s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0;
    };
    if (shape.size() == 4) {
      const double fan_in = static_cast<double>(shape[1] * shape[2] * shape[3]);
      const double bound = std::sqrt(3.0 / fan_in);  // unit-variance uniform
      for (auto& v : t.data) v = static_cast<float>(rng.uniform(-bound, bound));
    } else if (ends_with(".gamma")) {
      for (auto& v : t.data) v = static_cast<float>(rng.uniform(0.5, 1.0));
    } else if (ends_with(".beta")) {
      for (auto& v : t.data) v = static_cast<float>(rng.uniform(-0.1, 0.1));
    } else if (ends_with(".mean")) {
      for (auto& v : t.data) v = static_cast<float>(rng.uniform(-0.1, 0.1));
    } else {  // var
      for (auto& v : t.data) v = static_cast<float>(rng.uniform(0.5, 1.5));
    }
    w.tensors.emplace(name, std::move(t));
  }
  return w;
}

FeatureMap random_map(SplitMix64& rng, int channels, int height, int width, double lo, double hi) {
  FeatureMap m(channels, height, width);
  for (auto& v : m.data) v = static_cast<float>(rng.uniform(lo, hi));
  return m;
}

FeatureStack random_stack(SplitMix64& rng, int channels, int height, int width) {
  FeatureStack s;
  for (auto& m : s) m = random_map(rng, channels, height, width);
  return s;
}

DatasetManifest write_synthetic_triplets(const fs::path& dir, int n, int w, int h,
                                         std::uint64_t seed, bool with_reference) {
  fs::create_directories(dir);
  SplitMix64 rng(seed);
  DatasetManifest m;
  for (int i = 0; i < n; ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "t%03d", i);
    const Frame i0 = random_frame(rng, w, h);
    const Frame i1 = distorted_copy(i0, rng, 0.3);
    const Frame ref = distorted_copy(i0, rng, 0.15);
    const Frame it = distorted_copy(ref, rng, rng.uniform(0.0, 1.0));
    TripletRecord r;
    r.id = id;
    r.path_i0 = dir / (r.id + "_0.png");
    r.path_it = dir / (r.id + "_t.png");
    r.path_i1 = dir / (r.id + "_1.png");
    save_frame(i0, r.path_i0);
    save_frame(it, r.path_it);
    save_frame(i1, r.path_i1);
    if (with_reference) {
      r.path_ref = dir / (r.id + "_ref.png");
      save_frame(ref, *r.path_ref);
    }
    m.records.push_back(std::move(r));
  }
  return m;
}

void write_raw_png(const fs::path& path, int width, int height, int bit_depth, int channels,
                   const std::vector<std::uint8_t>& bytes) {
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  if (!f) throw std::runtime_error("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(f);
    throw std::runtime_error("png write failed");
  }
  const int color = channels == 1 ? PNG_COLOR_TYPE_GRAY
                    : channels == 3 ? PNG_COLOR_TYPE_RGB
                                    : PNG_COLOR_TYPE_RGB_ALPHA;
  png_init_io(png, f);
  png_set_IHDR(png, info, width, height, bit_depth, color, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(width) * channels * (bit_depth / 8);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(bytes.data() + stride * y));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(f);
}

SimilarityTable synthetic_table(SplitMix64& rng, int rows, const std::array<double, 12>& hidden,
                                double noise_sigma) {
  SimilarityTable t;
  for (int r = 0; r < rows; ++r) {
    SimilarityRow row;
    row.id = "r" + std::to_string(r);
    double mos = 0.0;
    for (int i = 0; i < kNumStages; ++i) {
      row.features.l_product[i] = row.features.l_left[i] = rng.uniform(0.2, 1.0);
      row.features.s_product[i] = row.features.s_left[i] = rng.uniform(0.2, 1.0);
      mos += hidden[i] * row.features.l_product[i] + hidden[kNumStages + i] * row.features.s_product[i];
    }
    row.mos = mos + noise_sigma * rng.normal();
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace vfiq::testing
