#include "vfiq/imageio.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "vfiq/errors.hpp"

namespace vfiq {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void png_error_handler(png_structp png, png_const_charp msg) {
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  if (text) *text = msg;
  png_longjmp(png, 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

}  // namespace

Frame load_frame(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.string().c_str(), "rb"));
  if (!file) throw InputError("cannot open image " + path.string());

  png_byte signature[8] = {};
  if (std::fread(signature, 1, 8, file.get()) != 8 || png_sig_cmp(signature, 0, 8) != 0) {
    throw InputError("unsupported image format (PNG only): " + path.string());
  }

  std::string message;
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_error_handler, png_warning_handler);
  if (!png) throw InputError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw InputError("libpng initialisation failed");
  }

  int width = 0;
  int height = 0;
  int depth = 0;
  std::vector<png_byte> pixels;
  std::vector<png_bytep> rows;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw InputError("corrupt PNG " + path.string() + ": " + message);
  }

  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);

  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  if (depth == 16) png_set_swap(png);  // little-endian uint16 in memory
  if (depth < 8) depth = 8;
  png_read_update_info(png, info);

  const std::size_t rowbytes = png_get_rowbytes(png, info);
  if (rowbytes != static_cast<std::size_t>(width) * 3 * (depth / 8)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw InputError("unexpected PNG layout in " + path.string());
  }
  pixels.resize(rowbytes * height);
  rows.resize(height);
  for (int y = 0; y < height; ++y) rows[y] = pixels.data() + rowbytes * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  if (width < Frame::kMinSide || height < Frame::kMinSide) {
    throw InputError("image " + path.string() + " is " + std::to_string(width) + "x" +
                     std::to_string(height) + ", minimum is 32x32");
  }

  const std::size_t plane = static_cast<std::size_t>(width) * height;
  std::vector<float> data(plane * 3);
  if (depth == 16) {
    const auto* src = reinterpret_cast<const std::uint16_t*>(pixels.data());
    for (std::size_t p = 0; p < plane; ++p) {
      for (int c = 0; c < 3; ++c) data[c * plane + p] = static_cast<float>(src[p * 3 + c] / 65535.0);
    }
  } else {
    for (std::size_t p = 0; p < plane; ++p) {
      for (int c = 0; c < 3; ++c) data[c * plane + p] = static_cast<float>(pixels[p * 3 + c] / 255.0);
    }
  }
  return Frame(width, height, std::move(data));
}

void save_frame(const Frame& frame, const std::filesystem::path& path, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw InputError("bit depth must be 8 or 16");
  FilePtr file(std::fopen(path.string().c_str(), "wb"));
  if (!file) throw InputError("cannot write image " + path.string());

  std::string message;
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, png_error_handler, png_warning_handler);
  if (!png) throw InputError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw InputError("libpng initialisation failed");
  }

  const int width = frame.width();
  const int height = frame.height();
  const std::size_t plane = static_cast<std::size_t>(width) * height;
  const int bytes = bit_depth / 8;
  const double scale = bit_depth == 8 ? 255.0 : 65535.0;
  std::vector<png_byte> pixels(plane * 3 * bytes);
  for (std::size_t p = 0; p < plane; ++p) {
    for (int c = 0; c < 3; ++c) {
      const auto code = static_cast<unsigned>(frame.data()[c * plane + p] * scale + 0.5);
      if (bytes == 1) {
        pixels[p * 3 + c] = static_cast<png_byte>(code);
      } else {
        pixels[(p * 3 + c) * 2] = static_cast<png_byte>(code >> 8);  // PNG is big-endian
        pixels[(p * 3 + c) * 2 + 1] = static_cast<png_byte>(code & 0xFF);
      }
    }
  }
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) rows[y] = pixels.data() + static_cast<std::size_t>(y) * width * 3 * bytes;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw InputError("failed to encode PNG " + path.string() + ": " + message);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, width, height, bit_depth, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

int padded_extent(int n) { return (n + 31) / 32 * 32; }

NormalizedTensor to_model_input(const Frame& frame) {
  const int w = frame.width();
  const int h = frame.height();
  const int pw = padded_extent(w);
  const int ph = padded_extent(h);
  // Reflection without edge repetition: index n + k maps to n - 2 - k.
  auto reflect = [](int i, int n) { return i < n ? i : 2 * (n - 1) - i; };

  NormalizedTensor out{FeatureMap(3, ph, pw)};
  for (int c = 0; c < 3; ++c) {
    const float mean = kImageNetMean[c];
    const float stddev = kImageNetStd[c];
    for (int y = 0; y < ph; ++y) {
      const int sy = reflect(y, h);
      for (int x = 0; x < pw; ++x) {
        out.map.at(c, y, x) = (frame.at(c, sy, reflect(x, w)) - mean) / stddev;
      }
    }
  }
  return out;
}

}  // namespace vfiq
