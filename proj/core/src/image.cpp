#include "ltnn/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>

#include "ltnn/errors.hpp"

namespace ltnn {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void write_png(const std::string& path, const Image& image) {
  if (image.width <= 0 || image.height <= 0 ||
      image.rgb.size() != static_cast<std::size_t>(image.width) * image.height * 3) {
    throw std::invalid_argument("write_png: malformed image");
  }
  File file(std::fopen(path.c_str(), "wb"));
  if (!file) throw std::runtime_error("cannot open " + path + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("failed writing PNG " + path);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
               static_cast<png_uint_32>(image.height), 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(image.pixel(0, y)));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image read_png(const std::string& path) {
  File file(std::fopen(path.c_str(), "rb"));
  if (!file) throw std::runtime_error("cannot open " + path + " for reading");
  png_byte header[8];
  if (std::fread(header, 1, 8, file.get()) != 8 || png_sig_cmp(header, 0, 8) != 0) {
    throw FormatError(path + " is not a PNG file", 0);
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("libpng initialisation failed");
  }
  Image image;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("failed decoding PNG " + path);
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const auto color = png_get_color_type(png, info);
  const auto depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  image.width = static_cast<int>(png_get_image_width(png, info));
  image.height = static_cast<int>(png_get_image_height(png, info));
  image.rgb.resize(static_cast<std::size_t>(image.width) * image.height * 3);
  for (int y = 0; y < image.height; ++y) png_read_row(png, image.pixel(0, y), nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

Image compose_grid(const std::vector<std::vector<Image>>& rows, int gap, std::uint8_t background) {
  if (rows.empty() || rows.front().empty()) throw std::invalid_argument("compose_grid: no tiles");
  const int tw = rows.front().front().width;
  const int th = rows.front().front().height;
  std::size_t cols = 0;
  for (const auto& r : rows) cols = std::max(cols, r.size());
  const int W = static_cast<int>(cols) * tw + (static_cast<int>(cols) + 1) * gap;
  const int H = static_cast<int>(rows.size()) * th + (static_cast<int>(rows.size()) + 1) * gap;
  Image grid(W, H, background);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      const Image& tile = rows[r][c];
      if (tile.width != tw || tile.height != th) {
        throw std::invalid_argument("compose_grid: tiles differ in size");
      }
      const int x0 = gap + static_cast<int>(c) * (tw + gap);
      const int y0 = gap + static_cast<int>(r) * (th + gap);
      for (int y = 0; y < th; ++y) {
        std::copy_n(tile.pixel(0, y), static_cast<std::size_t>(tw) * 3, grid.pixel(x0, y0 + y));
      }
    }
  }
  return grid;
}

Image tensor_to_image(const Tensor& batch, std::size_t n) {
  if (batch.rank() != 4 || batch.dim(1) != 3 || n >= batch.dim(0)) {
    throw DimensionError("tensor_to_image: expected N x 3 x H x W, got " + to_string(batch.shape()));
  }
  const std::size_t H = batch.dim(2), W = batch.dim(3), plane = H * W;
  Image img(static_cast<int>(W), static_cast<int>(H));
  const Real* src = batch.data().data() + n * 3 * plane;
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      const double v = std::clamp(static_cast<double>(src[c * plane + i]), 0.0, 1.0);
      img.rgb[i * 3 + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  }
  return img;
}

Tensor image_to_tensor(const Image& image) {
  const std::size_t H = static_cast<std::size_t>(image.height);
  const std::size_t W = static_cast<std::size_t>(image.width);
  const std::size_t plane = H * W;
  std::vector<Real> values(3 * plane);
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < 3; ++c) values[c * plane + i] = Real(image.rgb[i * 3 + c]) / Real(255);
  }
  return Tensor::from({1, 3, H, W}, std::move(values));
}

}  // namespace ltnn
