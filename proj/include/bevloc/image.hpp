#ifndef BEVLOC_IMAGE_HPP_
#define BEVLOC_IMAGE_HPP_

#include <cstdint>
#include <filesystem>
#include <vector>

namespace bevloc {

struct Rgb8 {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  bool operator==(const Rgb8&) const = default;
};

/// Interleaved 8-bit RGB raster, row-major from the top-left pixel.
class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(int width, int height, Rgb8 fill = {});

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }

  Rgb8 at(int x, int y) const;
  void set(int x, int y, Rgb8 c);
  const std::vector<std::uint8_t>& bytes() const { return data_; }
  std::vector<std::uint8_t>& bytes() { return data_; }

  bool operator==(const RgbImage&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Per-pixel distance along the pixel ray divided by the far plane, in [0, 1].
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  float at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  bool operator==(const DepthMap&) const = default;
};

/// Binary P6 with maxval 255.
void write_ppm(const std::filesystem::path& path, const RgbImage& img);
RgbImage read_ppm(const std::filesystem::path& path);

/// Little-endian float32, row-major, no header.
void write_depth(const std::filesystem::path& path, const DepthMap& depth);
DepthMap read_depth(const std::filesystem::path& path, int width, int height);

/// Draws the outline of [u_min, u_max] x [v_min, v_max] (pixel-center convention:
/// pixel x covers [x, x + 1)).
void draw_rect(RgbImage& img, double u_min, double v_min, double u_max, double v_max,
               Rgb8 color);

}  // namespace bevloc

#endif  // BEVLOC_IMAGE_HPP_
