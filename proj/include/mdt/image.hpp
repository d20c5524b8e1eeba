// 8-bit RGB images, binary PPM io, and the scale+crop sampler that feeds the
// convolutional stack.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mdt/box.hpp"
#include "mdt/tensor.hpp"

namespace mdt {

struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // interleaved RGB, row-major

  Image() = default;
  Image(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::uint8_t& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  std::uint8_t at(int x, int y, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
};

void save_ppm(const std::string& path, const Image& img);
Image load_ppm(const std::string& path);

/// Similarity transform between source pixels and crop pixels:
/// crop = scale * src - offset.
struct AffineMap {
  double scale = 1.0;
  double off_x = 0.0;
  double off_y = 0.0;

  Box apply(const Box& b) const {
    return Box(b.x1 * scale - off_x, b.y1 * scale - off_y, b.x2 * scale - off_x, b.y2 * scale - off_y);
  }
  Box invert(const Box& b) const {
    return Box((b.x1 + off_x) / scale, (b.y1 + off_y) / scale, (b.x2 + off_x) / scale, (b.y2 + off_y) / scale);
  }
};

/// Bilinear sample of channel-planar crop from an image under the inverse of
/// `map`. Output is [3, out_h, out_w] with intensities scaled to [0,1];
/// samples outside the source image read as 0.
Tensord sample_crop(const Image& src, const AffineMap& map, int out_w, int out_h);

}  // namespace mdt
