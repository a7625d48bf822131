#ifndef BEVLOC_GEOMETRY_HPP_
#define BEVLOC_GEOMETRY_HPP_

#include <array>
#include <optional>
#include <stdexcept>

#include <Eigen/Core>

namespace bevloc {

// Ego frame: x lateral-right, y forward, z up, origin on the ground below the
// camera. PV images have their origin at the top-left with v growing
// downward. BEV row 0 is the farthest row ahead of the ego.

inline constexpr double kNearPlaneM = 0.1;

/// Raised when a camera cannot see the ground plane, so no homography exists.
class SingularConfiguration : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PixelPoint {
  double u = 0.0;
  double v = 0.0;
};

/// Forward-facing pinhole camera with square pixels and the principal point
/// at the image center.
struct CameraModel {
  int width_px = 1024;
  int height_px = 768;
  double hfov_deg = 110.0;
  double cam_height_m = 1.6;
  double pitch_deg = 0.0;  // positive tilts the optical axis toward the ground

  void validate() const;
  double focal_px() const;
  double cx() const { return width_px / 2.0; }
  double cy() const { return height_px / 2.0; }
};

/// Ego-anchored top-down raster. The ego center sits at the bottom-center
/// pixel and faces toward row 0.
struct BevGrid {
  int size_px = 200;
  double px_per_m = 4.0;

  void validate() const;
  double coverage_m() const { return size_px / px_per_m; }
  PixelPoint anchor() const {
    return {size_px / 2.0, static_cast<double>(size_px - 1)};
  }
  PixelPoint ground_to_pixel(double x_lat, double y_fwd) const {
    const PixelPoint a = anchor();
    return {a.u + px_per_m * x_lat, a.v - px_per_m * y_fwd};
  }
};

/// Planar pose in the world frame. Heading is (cos yaw, sin yaw).
struct Pose2 {
  double x_m = 0.0;
  double y_m = 0.0;
  double yaw_rad = 0.0;
};

/// Wraps an angle into (-pi, pi].
double normalize_angle(double rad);

/// Oriented vehicle box. Its length runs along (cos yaw, sin yaw).
struct Box3 {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double yaw_rad = 0.0;
  double length_m = 1.0;
  double width_m = 1.0;
  double height_m = 1.0;

  void validate() const;
  /// Bottom four corners first (counter-clockwise), then the top four.
  std::array<Eigen::Vector3d, 8> corners() const;
  std::array<Eigen::Vector2d, 4> ground_corners() const;
};

/// Box3 whose footprint rests on the ground plane.
Box3 ground_box(double x, double y, double yaw_rad, double length_m,
                double width_m, double height_m);

/// Expresses a world-frame box in the frame of an ego at `ego`.
Box3 world_to_ego(const Pose2& ego, const Box3& world_box);
Eigen::Vector2d world_to_ego(const Pose2& ego, const Eigen::Vector2d& p);

/// Axis-aligned box stored as min/max corners. The tag keeps PV and BEV
/// pixel spaces from being mixed up.
template <class Tag>
struct AxisBox {
  double u_min = 0.0;
  double v_min = 0.0;
  double u_max = 0.0;
  double v_max = 0.0;

  double width() const { return u_max - u_min; }
  double height() const { return v_max - v_min; }
  double area() const { return width() * height(); }
  PixelPoint center() const {
    return {0.5 * (u_min + u_max), 0.5 * (v_min + v_max)};
  }
  bool operator==(const AxisBox&) const = default;
};

using PvBox = AxisBox<struct PvTag>;
using BevBox = AxisBox<struct BevTag>;

double focal_from_fov(int width_px, double hfov_deg);

/// Camera-frame coordinates (X right, Y down, Z along the optical axis).
Eigen::Vector3d ego_to_camera(const CameraModel& cam, const Eigen::Vector3d& p_ego);

/// Pinhole projection; absent for points at or behind the near plane.
std::optional<PixelPoint> project_point(const CameraModel& cam,
                                        const Eigen::Vector3d& p_ego);

/// Hull of the projected box, with edges clipped at the near plane and the
/// result clipped to the image. Occlusion is not considered.
std::optional<PvBox> project_box_pv(const CameraModel& cam, const Box3& box);

/// Hull of the ground footprint in grid pixels, clipped to the grid.
std::optional<BevBox> footprint_bev(const BevGrid& grid, const Box3& box);

/// Maps homogeneous PV pixels of ground points to homogeneous BEV pixels.
/// Throws SingularConfiguration when the ground plane is not visible.
Eigen::Matrix3d homography_matrix(const CameraModel& cam, const BevGrid& grid);

/// Applies `h` and dehomogenizes. Absent when the pixel ray does not hit
/// the ground in front of the camera.
std::optional<PixelPoint> apply_homography(const Eigen::Matrix3d& h,
                                           const PixelPoint& uv);

/// Inverse perspective mapping of one PV pixel onto the BEV grid. Absent
/// above the horizon or outside the grid.
std::optional<PixelPoint> ipm_ground(const CameraModel& cam, const BevGrid& grid,
                                     const PixelPoint& uv);

}  // namespace bevloc

#endif  // BEVLOC_GEOMETRY_HPP_
