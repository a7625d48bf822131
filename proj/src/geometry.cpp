#include "bevloc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace bevloc {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

PixelPoint project_camera_point(const CameraModel& cam, const Eigen::Vector3d& pc) {
  const double f = cam.focal_px();
  return {cam.cx() + f * pc.x() / pc.z(), cam.cy() + f * pc.y() / pc.z()};
}

// Direction of the pixel ray in the ego frame (not normalized).
Eigen::Vector3d pixel_ray_ego(const CameraModel& cam, const PixelPoint& uv) {
  const double f = cam.focal_px();
  const double th = cam.pitch_deg * kDegToRad;
  const double dx = (uv.u - cam.cx()) / f;
  const double dy = (uv.v - cam.cy()) / f;
  // camera right, down and forward axes expressed in the ego frame
  const Eigen::Vector3d right(1.0, 0.0, 0.0);
  const Eigen::Vector3d down(0.0, -std::sin(th), -std::cos(th));
  const Eigen::Vector3d fwd(0.0, std::cos(th), -std::sin(th));
  return dx * right + dy * down + fwd;
}

template <class Box>
Box clip_hull(double u_min, double v_min, double u_max, double v_max,
              double u_lim, double v_lim) {
  return Box{std::clamp(u_min, 0.0, u_lim), std::clamp(v_min, 0.0, v_lim),
             std::clamp(u_max, 0.0, u_lim), std::clamp(v_max, 0.0, v_lim)};
}

}  // namespace

void CameraModel::validate() const {
  if (width_px <= 0 || height_px <= 0) {
    throw std::invalid_argument("camera: image dimensions must be positive");
  }
  if (!(hfov_deg > 0.0 && hfov_deg < 180.0)) {
    throw std::invalid_argument("camera: hfov_deg must lie in (0, 180), got " +
                                std::to_string(hfov_deg));
  }
  if (!std::isfinite(cam_height_m)) {
    throw std::invalid_argument("camera: cam_height_m must be finite");
  }
  if (!(pitch_deg > -90.0 && pitch_deg < 90.0)) {
    throw std::invalid_argument("camera: pitch_deg must lie in (-90, 90)");
  }
}

double CameraModel::focal_px() const { return focal_from_fov(width_px, hfov_deg); }

void BevGrid::validate() const {
  if (size_px <= 0 || !(px_per_m > 0.0)) {
    throw std::invalid_argument("bev grid: size_px and px_per_m must be positive");
  }
}

double normalize_angle(double rad) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double a = std::fmod(rad, kTwoPi);
  if (a <= -std::numbers::pi) a += kTwoPi;
  if (a > std::numbers::pi) a -= kTwoPi;
  return a;
}

void Box3::validate() const {
  if (!(length_m > 0.0 && width_m > 0.0 && height_m > 0.0)) {
    throw std::invalid_argument("box: dimensions must be positive");
  }
  if (!center.allFinite() || !std::isfinite(yaw_rad)) {
    throw std::invalid_argument("box: pose must be finite");
  }
}

std::array<Eigen::Vector2d, 4> Box3::ground_corners() const {
  const Eigen::Vector2d c(center.x(), center.y());
  const Eigen::Vector2d heading(std::cos(yaw_rad), std::sin(yaw_rad));
  const Eigen::Vector2d left(-heading.y(), heading.x());
  const double a = 0.5 * length_m;
  const double b = 0.5 * width_m;
  return {c + a * heading + b * left, c - a * heading + b * left,
          c - a * heading - b * left, c + a * heading - b * left};
}

std::array<Eigen::Vector3d, 8> Box3::corners() const {
  const auto g = ground_corners();
  const double z0 = center.z() - 0.5 * height_m;
  const double z1 = center.z() + 0.5 * height_m;
  std::array<Eigen::Vector3d, 8> out;
  for (int i = 0; i < 4; ++i) {
    out[i] = Eigen::Vector3d(g[i].x(), g[i].y(), z0);
    out[i + 4] = Eigen::Vector3d(g[i].x(), g[i].y(), z1);
  }
  return out;
}

Box3 ground_box(double x, double y, double yaw_rad, double length_m, double width_m,
                double height_m) {
  Box3 b;
  b.center = Eigen::Vector3d(x, y, 0.5 * height_m);
  b.yaw_rad = yaw_rad;
  b.length_m = length_m;
  b.width_m = width_m;
  b.height_m = height_m;
  return b;
}

Eigen::Vector2d world_to_ego(const Pose2& ego, const Eigen::Vector2d& p) {
  const Eigen::Vector2d d(p.x() - ego.x_m, p.y() - ego.y_m);
  const Eigen::Vector2d fwd(std::cos(ego.yaw_rad), std::sin(ego.yaw_rad));
  const Eigen::Vector2d right(fwd.y(), -fwd.x());
  return {d.dot(right), d.dot(fwd)};
}

Box3 world_to_ego(const Pose2& ego, const Box3& world_box) {
  Box3 b = world_box;
  const Eigen::Vector2d c =
      world_to_ego(ego, Eigen::Vector2d(world_box.center.x(), world_box.center.y()));
  b.center = Eigen::Vector3d(c.x(), c.y(), world_box.center.z());
  b.yaw_rad = normalize_angle(world_box.yaw_rad - ego.yaw_rad + std::numbers::pi / 2.0);
  return b;
}

double focal_from_fov(int width_px, double hfov_deg) {
  if (!(hfov_deg > 0.0 && hfov_deg < 180.0)) {
    throw std::invalid_argument("focal_from_fov: hfov_deg must lie in (0, 180)");
  }
  if (width_px <= 0) {
    throw std::invalid_argument("focal_from_fov: width_px must be positive");
  }
  return (width_px / 2.0) / std::tan(0.5 * hfov_deg * kDegToRad);
}

Eigen::Vector3d ego_to_camera(const CameraModel& cam, const Eigen::Vector3d& p) {
  const double th = cam.pitch_deg * kDegToRad;
  const double s = std::sin(th);
  const double c = std::cos(th);
  const double dz = p.z() - cam.cam_height_m;
  return {p.x(), -s * p.y() - c * dz, c * p.y() - s * dz};
}

std::optional<PixelPoint> project_point(const CameraModel& cam, const Eigen::Vector3d& p) {
  const Eigen::Vector3d pc = ego_to_camera(cam, p);
  if (pc.z() <= kNearPlaneM) return std::nullopt;
  return project_camera_point(cam, pc);
}

std::optional<PvBox> project_box_pv(const CameraModel& cam, const Box3& box) {
  static constexpr std::array<std::array<int, 2>, 12> kEdges = {{
      {0, 1}, {1, 2}, {2, 3}, {3, 0},
      {4, 5}, {5, 6}, {6, 7}, {7, 4},
      {0, 4}, {1, 5}, {2, 6}, {3, 7},
  }};
  std::array<Eigen::Vector3d, 8> pc;
  const auto corners = box.corners();
  for (int i = 0; i < 8; ++i) pc[i] = ego_to_camera(cam, corners[i]);

  std::vector<PixelPoint> pts;
  pts.reserve(20);
  for (const auto& p : pc) {
    if (p.z() > kNearPlaneM) pts.push_back(project_camera_point(cam, p));
  }
  if (pts.empty()) return std::nullopt;
  if (pts.size() < 8) {
    for (const auto& [a, b] : kEdges) {
      const bool fa = pc[a].z() > kNearPlaneM;
      const bool fb = pc[b].z() > kNearPlaneM;
      if (fa == fb) continue;
      const double t = (kNearPlaneM - pc[a].z()) / (pc[b].z() - pc[a].z());
      Eigen::Vector3d q = pc[a] + t * (pc[b] - pc[a]);
      q.z() = kNearPlaneM;
      pts.push_back(project_camera_point(cam, q));
    }
  }

  double u0 = pts[0].u, u1 = pts[0].u, v0 = pts[0].v, v1 = pts[0].v;
  for (const auto& p : pts) {
    u0 = std::min(u0, p.u);
    u1 = std::max(u1, p.u);
    v0 = std::min(v0, p.v);
    v1 = std::max(v1, p.v);
  }
  const auto out = clip_hull<PvBox>(u0, v0, u1, v1, cam.width_px, cam.height_px);
  if (!(out.u_max > out.u_min && out.v_max > out.v_min)) return std::nullopt;
  return out;
}

std::optional<BevBox> footprint_bev(const BevGrid& grid, const Box3& box) {
  const auto g = box.ground_corners();
  double u0 = 0, u1 = 0, v0 = 0, v1 = 0;
  for (int i = 0; i < 4; ++i) {
    const PixelPoint p = grid.ground_to_pixel(g[i].x(), g[i].y());
    if (i == 0) {
      u0 = u1 = p.u;
      v0 = v1 = p.v;
    } else {
      u0 = std::min(u0, p.u);
      u1 = std::max(u1, p.u);
      v0 = std::min(v0, p.v);
      v1 = std::max(v1, p.v);
    }
  }
  const double lim = grid.size_px;
  if (u1 < 0.0 || v1 < 0.0 || u0 > lim || v0 > lim) return std::nullopt;
  return clip_hull<BevBox>(u0, v0, u1, v1, lim, lim);
}

Eigen::Matrix3d homography_matrix(const CameraModel& cam, const BevGrid& grid) {
  cam.validate();
  grid.validate();
  if (!(cam.cam_height_m > 0.0)) {
    throw SingularConfiguration("homography: camera must sit above the ground plane");
  }
  const PixelPoint bottom{cam.cx(), static_cast<double>(cam.height_px)};
  if (!(pixel_ray_ego(cam, bottom).z() < 0.0)) {
    throw SingularConfiguration("homography: ground plane is not visible");
  }
  const double f = cam.focal_px();
  const double th = cam.pitch_deg * kDegToRad;
  const double h = cam.cam_height_m;
  Eigen::Matrix3d k;
  k << f, 0.0, cam.cx(),
       0.0, f, cam.cy(),
       0.0, 0.0, 1.0;
  // ground (x, y, 1) -> camera coordinates
  Eigen::Matrix3d rt;
  rt << 1.0, 0.0, 0.0,
        0.0, -std::sin(th), h * std::cos(th),
        0.0, std::cos(th), h * std::sin(th);
  const PixelPoint a = grid.anchor();
  Eigen::Matrix3d to_grid;
  to_grid << grid.px_per_m, 0.0, a.u,
             0.0, -grid.px_per_m, a.v,
             0.0, 0.0, 1.0;
  const Eigen::Matrix3d ground_to_image = k * rt;
  Eigen::FullPivLU<Eigen::Matrix3d> lu(ground_to_image);
  if (!lu.isInvertible()) {
    throw SingularConfiguration("homography: ground-to-image map is singular");
  }
  return to_grid * lu.inverse();
}

std::optional<PixelPoint> apply_homography(const Eigen::Matrix3d& h, const PixelPoint& uv) {
  const Eigen::Vector3d q = h * Eigen::Vector3d(uv.u, uv.v, 1.0);
  if (!(q.z() > 0.0)) return std::nullopt;
  return PixelPoint{q.x() / q.z(), q.y() / q.z()};
}

std::optional<PixelPoint> ipm_ground(const CameraModel& cam, const BevGrid& grid,
                                     const PixelPoint& uv) {
  if (!(pixel_ray_ego(cam, uv).z() < 0.0)) return std::nullopt;
  const auto p = apply_homography(homography_matrix(cam, grid), uv);
  if (!p) return std::nullopt;
  const double lim = grid.size_px;
  if (p->u < 0.0 || p->v < 0.0 || p->u > lim || p->v > lim) return std::nullopt;
  return p;
}

}  // namespace bevloc
