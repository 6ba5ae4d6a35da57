#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ltnn/tensor.hpp"

namespace ltnn {

/// 8-bit interleaved RGB image.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // height * width * 3

  Image() = default;
  Image(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, fill) {}

  std::uint8_t* pixel(int x, int y) { return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
  const std::uint8_t* pixel(int x, int y) const {
    return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
  bool operator==(const Image&) const = default;
};

/// Writes an 8-bit RGB PNG.
void write_png(const std::string& path, const Image& image);
/// Reads any PNG libpng understands and converts it to 8-bit RGB
/// (alpha is dropped, gray is expanded, 16-bit is stripped).
Image read_png(const std::string& path);

/// Lays out rows of equally sized tiles with `gap` pixels of `background`.
Image compose_grid(const std::vector<std::vector<Image>>& rows, int gap = 2,
                   std::uint8_t background = 255);

/// Image n of an N x 3 x H x W tensor, clamped to [0, 1] and rounded.
Image tensor_to_image(const Tensor& batch, std::size_t n);
/// 1 x 3 x H x W tensor with values u8 / 255.
Tensor image_to_tensor(const Image& image);

}  // namespace ltnn
