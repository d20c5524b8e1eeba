#include "mdt/image.hpp"

#include <cmath>
#include <fstream>

namespace mdt {

void save_ppm(const std::string& path, const Image& img) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open image for writing: " + path);
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
  if (!out) throw IoError("image write failed: " + path);
}

Image load_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image: " + path);
  std::string magic;
  in >> magic;
  if (magic != "P6") throw IoError("unsupported image format (want binary PPM): " + path);
  auto skip_ws_and_comments = [&in]() {
    while (true) {
      int c = in.peek();
      if (c == '#') {
        std::string line;
        std::getline(in, line);
      } else if (std::isspace(c)) {
        in.get();
      } else {
        break;
      }
    }
  };
  int w = 0, h = 0, maxval = 0;
  skip_ws_and_comments();
  in >> w;
  skip_ws_and_comments();
  in >> h;
  skip_ws_and_comments();
  in >> maxval;
  in.get();  // single whitespace before raster
  if (!in || w <= 0 || h <= 0 || maxval != 255) throw IoError("bad PPM header: " + path);
  Image img(w, h);
  in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
  if (!in) throw IoError("truncated PPM raster: " + path);
  return img;
}

Tensord sample_crop(const Image& src, const AffineMap& map, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1) throw ArgumentError("crop size must be positive");
  Tensord crop({3, out_h, out_w});
  const double inv = 1.0 / map.scale;
  for (int y = 0; y < out_h; ++y) {
    const double sy = (y + map.off_y) * inv;
    const int y0 = static_cast<int>(std::floor(sy));
    const double fy = sy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double sx = (x + map.off_x) * inv;
      const int x0 = static_cast<int>(std::floor(sx));
      const double fx = sx - x0;
      for (int c = 0; c < 3; ++c) {
        auto tap = [&](int xi, int yi) -> double {
          if (xi < 0 || yi < 0 || xi >= src.width || yi >= src.height) return 0.0;
          return src.at(xi, yi, c) / 255.0;
        };
        const double v = (1 - fy) * ((1 - fx) * tap(x0, y0) + fx * tap(x0 + 1, y0)) +
                         fy * ((1 - fx) * tap(x0, y0 + 1) + fx * tap(x0 + 1, y0 + 1));
        crop(c, y, x) = v;
      }
    }
  }
  return crop;
}

}  // namespace mdt
