#include "bevloc/image.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace bevloc {

RgbImage::RgbImage(int width, int height, Rgb8 fill) : width_(width), height_(height) {
  if (width < 0 || height < 0) throw std::invalid_argument("image: negative size");
  data_.resize(static_cast<std::size_t>(width) * height * 3);
  for (std::size_t i = 0; i < data_.size(); i += 3) {
    data_[i] = fill.r;
    data_[i + 1] = fill.g;
    data_[i + 2] = fill.b;
  }
}

Rgb8 RgbImage::at(int x, int y) const {
  const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
  return {data_[i], data_[i + 1], data_[i + 2]};
}

void RgbImage::set(int x, int y, Rgb8 c) {
  const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
  data_[i] = c.r;
  data_[i + 1] = c.g;
  data_[i + 2] = c.b;
}

void write_ppm(const std::filesystem::path& path, const RgbImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.bytes().data()),
            static_cast<std::streamsize>(img.bytes().size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

RgbImage read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P6" || w <= 0 || h <= 0 || maxval != 255) {
    throw std::runtime_error("unsupported PPM header in " + path.string());
  }
  in.get();  // single whitespace after maxval
  RgbImage img(w, h);
  in.read(reinterpret_cast<char*>(img.bytes().data()),
          static_cast<std::streamsize>(img.bytes().size()));
  if (in.gcount() != static_cast<std::streamsize>(img.bytes().size())) {
    throw std::runtime_error("truncated PPM: " + path.string());
  }
  return img;
}

void write_depth(const std::filesystem::path& path, const DepthMap& depth) {
  static_assert(sizeof(float) == 4);
  std::vector<std::uint32_t> words(depth.data.size());
  for (std::size_t i = 0; i < words.size(); ++i) {
    std::uint32_t w = std::bit_cast<std::uint32_t>(depth.data[i]);
    if constexpr (std::endian::native == std::endian::big) w = __builtin_bswap32(w);
    words[i] = w;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(words.data()),
            static_cast<std::streamsize>(words.size() * 4));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

DepthMap read_depth(const std::filesystem::path& path, int width, int height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  DepthMap d{width, height, {}};
  std::vector<std::uint32_t> words(static_cast<std::size_t>(width) * height);
  in.read(reinterpret_cast<char*>(words.data()),
          static_cast<std::streamsize>(words.size() * 4));
  if (in.gcount() != static_cast<std::streamsize>(words.size() * 4)) {
    throw std::runtime_error("truncated depth map: " + path.string());
  }
  d.data.resize(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) {
    std::uint32_t w = words[i];
    if constexpr (std::endian::native == std::endian::big) w = __builtin_bswap32(w);
    d.data[i] = std::bit_cast<float>(w);
  }
  return d;
}

void draw_rect(RgbImage& img, double u_min, double v_min, double u_max, double v_max,
               Rgb8 color) {
  if (img.empty()) return;
  const auto px = [](double c, int lim) {
    return std::clamp(static_cast<int>(std::floor(c)), 0, lim - 1);
  };
  const int x0 = px(u_min, img.width());
  const int x1 = px(u_max, img.width());
  const int y0 = px(v_min, img.height());
  const int y1 = px(v_max, img.height());
  for (int x = x0; x <= x1; ++x) {
    img.set(x, y0, color);
    img.set(x, y1, color);
  }
  for (int y = y0; y <= y1; ++y) {
    img.set(x0, y, color);
    img.set(x1, y, color);
  }
}

}  // namespace bevloc
