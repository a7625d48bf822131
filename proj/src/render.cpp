#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>

#include "bevloc/scenegen.hpp"

namespace bevloc {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kLineHalfWidthM = 0.08;
constexpr double kDashPeriodM = 9.0;
constexpr double kDashOnM = 3.0;

struct Color {
  double r = 0, g = 0, b = 0;
};

Color operator*(const Color& c, double s) { return {c.r * s, c.g * s, c.b * s}; }
Color operator+(const Color& a, const Color& b) { return {a.r + b.r, a.g + b.g, a.b + b.b}; }

Color from8(Rgb8 c) { return {double(c.r), double(c.g), double(c.b)}; }

struct CameraFrame {
  double f, cx, cy, h;
  Eigen::Vector3d right, down, fwd;  // camera axes in the ego frame

  explicit CameraFrame(const CameraModel& cam)
      : f(cam.focal_px()), cx(cam.cx()), cy(cam.cy()), h(cam.cam_height_m) {
    const double th = cam.pitch_deg * kDegToRad;
    right = {1.0, 0.0, 0.0};
    down = {0.0, -std::sin(th), -std::cos(th)};
    fwd = {0.0, std::cos(th), -std::sin(th)};
  }

  Eigen::Vector3d origin() const { return {0.0, 0.0, h}; }

  Eigen::Vector3d ray(double u, double v) const {
    return ((u - cx) / f * right + (v - cy) / f * down + fwd).normalized();
  }
};

double brightness(const WeatherPreset& w) {
  const double sun = std::sin(w.sun_altitude_deg * kDegToRad);
  return std::clamp(0.55 + 0.45 * sun, 0.3, 1.0) * (1.0 - 0.3 * w.cloudiness);
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

// Ground color at an ego-frame ground point.
Color ground_color(const Scene& scene, double gx, double gy) {
  const Eigen::Vector2d fwd(std::cos(scene.ego.yaw_rad), std::sin(scene.ego.yaw_rad));
  const Eigen::Vector2d right(fwd.y(), -fwd.x());
  const Eigen::Vector2d w = Eigen::Vector2d(scene.ego.x_m, scene.ego.y_m) + gx * right + gy * fwd;
  const double half_road = 0.5 * scene.num_lanes * scene.lane_width_m;
  if (std::abs(w.x()) > half_road + kLineHalfWidthM) return {70, 118, 62};
  for (int i = 0; i <= scene.num_lanes; ++i) {
    const double bx = -half_road + i * scene.lane_width_m;
    if (std::abs(w.x() - bx) > kLineHalfWidthM) continue;
    const bool solid = i == 0 || i == scene.num_lanes;
    const double phase = std::fmod(std::fmod(w.y(), kDashPeriodM) + kDashPeriodM, kDashPeriodM);
    if (solid || phase < kDashOnM) return {232, 232, 226};
  }
  return {88, 88, 94};
}

Color sky_color(const Eigen::Vector3d& dir) {
  const double t = std::clamp(dir.z(), 0.0, 1.0);
  return Color{200, 220, 245} * (1.0 - t) + Color{105, 155, 228} * t;
}

// Ray/oriented-box intersection distance (slab test in box coordinates).
std::optional<double> intersect_box(const Box3& box, const Eigen::Vector3d& o,
                                    const Eigen::Vector3d& d) {
  const Eigen::Vector3d heading(std::cos(box.yaw_rad), std::sin(box.yaw_rad), 0.0);
  const Eigen::Vector3d left(-heading.y(), heading.x(), 0.0);
  const Eigen::Vector3d up(0.0, 0.0, 1.0);
  const Eigen::Vector3d rel = o - box.center;
  const std::array<Eigen::Vector3d, 3> axes = {heading, left, up};
  const std::array<double, 3> half = {0.5 * box.length_m, 0.5 * box.width_m, 0.5 * box.height_m};
  double t0 = 0.0;
  double t1 = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    const double p = rel.dot(axes[k]);
    const double q = d.dot(axes[k]);
    if (std::abs(q) < 1e-15) {
      if (std::abs(p) > half[k]) return std::nullopt;
      continue;
    }
    double a = (-half[k] - p) / q;
    double b = (half[k] - p) / q;
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
    if (t0 > t1) return std::nullopt;
  }
  return t0;
}

using Polygon = std::vector<Eigen::Vector3d>;

// Keeps the part of a camera-frame polygon in front of the near plane.
Polygon clip_near(const Polygon& in) {
  Polygon out;
  for (std::size_t i = 0; i < in.size(); ++i) {
    const auto& a = in[i];
    const auto& b = in[(i + 1) % in.size()];
    const bool fa = a.z() > kNearPlaneM;
    const bool fb = b.z() > kNearPlaneM;
    if (fa) out.push_back(a);
    if (fa != fb) {
      const double t = (kNearPlaneM - a.z()) / (b.z() - a.z());
      Eigen::Vector3d q = a + t * (b - a);
      q.z() = kNearPlaneM;
      out.push_back(q);
    }
  }
  return out;
}

template <class Fn>
void fill_convex(const std::vector<PixelPoint>& poly, int width, int height, Fn&& plot) {
  if (poly.size() < 3) return;
  double u0 = poly[0].u, u1 = u0, v0 = poly[0].v, v1 = v0;
  for (const auto& p : poly) {
    u0 = std::min(u0, p.u);
    u1 = std::max(u1, p.u);
    v0 = std::min(v0, p.v);
    v1 = std::max(v1, p.v);
  }
  const int x0 = std::max(0, static_cast<int>(std::floor(u0 - 0.5)));
  const int x1 = std::min(width - 1, static_cast<int>(std::ceil(u1 - 0.5)));
  const int y0 = std::max(0, static_cast<int>(std::floor(v0 - 0.5)));
  const int y1 = std::min(height - 1, static_cast<int>(std::ceil(v1 - 0.5)));
  for (int y = y0; y <= y1; ++y) {
    const double pv = y + 0.5;
    for (int x = x0; x <= x1; ++x) {
      const double pu = x + 0.5;
      bool pos = false, neg = false;
      for (std::size_t i = 0; i < poly.size(); ++i) {
        const auto& a = poly[i];
        const auto& b = poly[(i + 1) % poly.size()];
        const double c = (b.u - a.u) * (pv - a.v) - (b.v - a.v) * (pu - a.u);
        if (c > 0) pos = true;
        if (c < 0) neg = true;
      }
      if (!(pos && neg)) plot(x, y);
    }
  }
}

}  // namespace

PvRender render_pv_layers(const Scene& scene, const CameraModel& cam, std::uint64_t noise_seed) {
  cam.validate();
  const int w = cam.width_px;
  const int h = cam.height_px;
  const CameraFrame cf(cam);
  std::vector<Color> px(static_cast<std::size_t>(w) * h);
  PvRender out;
  out.vehicle_index.assign(px.size(), -1);

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Eigen::Vector3d d = cf.ray(x + 0.5, y + 0.5);
      Color c;
      if (d.z() < 0.0) {
        const double t = cf.h / -d.z();
        c = ground_color(scene, t * d.x(), t * d.y());
      } else {
        c = sky_color(d);
      }
      px[static_cast<std::size_t>(y) * w + x] = c;
    }
  }

  // painter's algorithm: farthest vehicle first
  const auto boxes = scene.others_in_ego_frame();
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), 0);
  const Eigen::Vector3d eye = cf.origin();
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return (boxes[a].center - eye).norm() > (boxes[b].center - eye).norm();
  });
  static constexpr std::array<std::array<int, 4>, 6> kFaces = {{
      {0, 1, 2, 3}, {4, 5, 6, 7}, {0, 1, 5, 4}, {1, 2, 6, 5}, {2, 3, 7, 6}, {3, 0, 4, 7},
  }};
  const Eigen::Vector3d light = Eigen::Vector3d(0.3, -0.5, 0.8).normalized();
  const auto& types = vehicle_types();
  for (std::size_t idx : order) {
    const Box3& box = boxes[idx];
    if (!project_box_pv(cam, box)) continue;
    const auto corners = box.corners();
    const Color base = from8(types[scene.others[idx].type_id].color);
    for (const auto& face : kFaces) {
      Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
      for (int k : face) centroid += corners[k];
      centroid /= 4.0;
      const Eigen::Vector3d normal = (centroid - box.center).normalized();
      if (normal.dot(eye - centroid) <= 0.0) continue;
      Polygon poly;
      for (int k : face) poly.push_back(ego_to_camera(cam, corners[k]));
      poly = clip_near(poly);
      if (poly.size() < 3) continue;
      std::vector<PixelPoint> img;
      img.reserve(poly.size());
      for (const auto& p : poly) {
        img.push_back({cf.cx + cf.f * p.x() / p.z(), cf.cy + cf.f * p.y() / p.z()});
      }
      const Color shaded = base * (0.5 + 0.5 * std::max(0.0, normal.dot(light)));
      fill_convex(img, w, h, [&](int x, int y) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        px[i] = shaded;
        out.vehicle_index[i] = static_cast<std::int32_t>(idx);
      });
    }
  }

  // weather
  const double gain = brightness(scene.weather);
  const bool night = scene.weather.kind == WeatherKind::Night;
  const double amp = 25.0 * scene.weather.precipitation;
  std::mt19937_64 rng(noise_seed);
  std::uniform_real_distribution<double> noise(-amp, amp);
  out.rgb = RgbImage(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      Color c = px[static_cast<std::size_t>(y) * w + x] * gain;
      if (night) c = {c.r * 0.7, c.g * 0.8, c.b * 1.15};
      const double n = noise(rng);
      out.rgb.set(x, y, {to_byte(c.r + n), to_byte(c.g + n), to_byte(c.b + n)});
    }
  }
  return out;
}

RgbImage render_pv(const Scene& scene, const CameraModel& cam, std::uint64_t noise_seed) {
  return render_pv_layers(scene, cam, noise_seed).rgb;
}

DepthMap render_depth(const Scene& scene, const CameraModel& cam) {
  cam.validate();
  const int w = cam.width_px;
  const int h = cam.height_px;
  const CameraFrame cf(cam);
  const Eigen::Vector3d eye = cf.origin();

  struct Candidate {
    Box3 box;
    PvBox hull;
  };
  std::vector<Candidate> cands;
  for (const auto& b : scene.others_in_ego_frame()) {
    if (auto hull = project_box_pv(cam, b)) cands.push_back({b, *hull});
  }

  DepthMap d{w, h, std::vector<float>(static_cast<std::size_t>(w) * h, 1.0f)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double u = x + 0.5;
      const double v = y + 0.5;
      const Eigen::Vector3d dir = cf.ray(u, v);
      double t = std::numeric_limits<double>::infinity();
      if (dir.z() < 0.0) t = cf.h / -dir.z();
      for (const auto& c : cands) {
        if (u < c.hull.u_min - 1.0 || u > c.hull.u_max + 1.0 || v < c.hull.v_min - 1.0 ||
            v > c.hull.v_max + 1.0) {
          continue;
        }
        if (auto hit = intersect_box(c.box, eye, dir)) t = std::min(t, *hit);
      }
      d.data[static_cast<std::size_t>(y) * w + x] =
          static_cast<float>(std::min(t / kFarPlaneM, 1.0));
    }
  }
  return d;
}

}  // namespace bevloc
