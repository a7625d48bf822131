#include "bevloc/geometry.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/LU>
#include <gtest/gtest.h>

namespace bevloc {
namespace {

constexpr double kPi = std::numbers::pi;

CameraModel full_res_camera() { return CameraModel{1024, 768, 110.0, 1.6, 0.0}; }

// Independent pinhole: casts the ray through (u, v) and intersects z = 0.
std::optional<Eigen::Vector2d> ray_ground(const CameraModel& cam, double u, double v) {
  const double f = (cam.width_px / 2.0) / std::tan(cam.hfov_deg * kPi / 360.0);
  const double th = cam.pitch_deg * kPi / 180.0;
  const Eigen::Vector3d right(1, 0, 0), down(0, -std::sin(th), -std::cos(th)),
      fwd(0, std::cos(th), -std::sin(th));
  const Eigen::Vector3d d = right * ((u - cam.width_px / 2.0) / f) +
                            down * ((v - cam.height_px / 2.0) / f) + fwd;
  if (d.z() >= 0) return std::nullopt;
  const double t = -cam.cam_height_m / d.z();
  return Eigen::Vector2d(t * d.x(), t * d.y());
}

TEST(FocalFromFov, ClosedForm) {
  EXPECT_NEAR(focal_from_fov(1024, 110.0), 358.50625956337143, 1e-9);
  EXPECT_DOUBLE_EQ(focal_from_fov(1024, 90.0), 512.0);
  EXPECT_NEAR(focal_from_fov(200, 53.13), 200.0, 1e-3);
}

TEST(FocalFromFov, RejectsOutOfRange) {
  EXPECT_THROW(focal_from_fov(1024, 0.0), std::invalid_argument);
  EXPECT_THROW(focal_from_fov(1024, 180.0), std::invalid_argument);
  EXPECT_THROW(focal_from_fov(1024, -5.0), std::invalid_argument);
}

TEST(CameraModel, ValidatesDimensions) {
  CameraModel c = full_res_camera();
  c.width_px = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = full_res_camera();
  c.hfov_deg = 190;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_NO_THROW(full_res_camera().validate());
}

TEST(BevGrid, DefaultsCoverFiftyMeters) {
  const BevGrid g;
  EXPECT_DOUBLE_EQ(g.coverage_m(), 50.0);
  EXPECT_DOUBLE_EQ(g.anchor().u, 100.0);
  EXPECT_DOUBLE_EQ(g.anchor().v, 199.0);
}

TEST(ProjectPoint, OpticalAxis) {
  const auto p = project_point(full_res_camera(), {0.0, 10.0, 1.6});
  ASSERT_TRUE(p);
  EXPECT_NEAR(p->u, 512.0, 1e-12);
  EXPECT_NEAR(p->v, 384.0, 1e-12);
}

TEST(ProjectPoint, GroundPointAhead) {
  const auto p = project_point(full_res_camera(), {0.0, 10.0, 0.0});
  ASSERT_TRUE(p);
  EXPECT_NEAR(p->u, 512.0, 1e-12);
  EXPECT_NEAR(p->v, 441.36100153013945, 1e-9);
}

TEST(ProjectPoint, BehindCameraIsAbsent) {
  EXPECT_FALSE(project_point(full_res_camera(), {0.0, -5.0, 0.0}));
  EXPECT_FALSE(project_point(full_res_camera(), {0.0, kNearPlaneM, 0.0}));
}

TEST(ProjectPoint, AgreesWithRayIntersection) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ux(-20, 20), uy(2, 50), upitch(-5, 10);
  for (int i = 0; i < 500; ++i) {
    CameraModel cam = full_res_camera();
    cam.pitch_deg = upitch(rng);
    const Eigen::Vector3d p(ux(rng), uy(rng), 0.0);
    const auto px = project_point(cam, p);
    if (!px) continue;
    const auto back = ray_ground(cam, px->u, px->v);
    ASSERT_TRUE(back);
    EXPECT_NEAR(back->x(), p.x(), 1e-9);
    EXPECT_NEAR(back->y(), p.y(), 1e-9);
  }
}

TEST(ProjectPoint, CenterlineIsMonotone) {
  const CameraModel cam = full_res_camera();
  double prev = std::numeric_limits<double>::infinity();
  for (double y = 1.0; y <= 60.0; y += 0.5) {
    const double v = project_point(cam, {0.0, y, 0.0})->v;
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(ProjectBoxPv, FullyBehindIsAbsent) {
  EXPECT_FALSE(project_box_pv(full_res_camera(), ground_box(0, -10, kPi / 2, 4, 2, 1.5)));
}

TEST(ProjectBoxPv, CenteredBoxIsSymmetric) {
  const auto b = project_box_pv(full_res_camera(), ground_box(0, 15, kPi / 2, 4.5, 1.8, 1.5));
  ASSERT_TRUE(b);
  EXPECT_NEAR(b->u_min + b->u_max, 1024.0, 1e-9);
}

std::optional<PvBox> brute_force_hull(const CameraModel& cam, const Box3& box) {
  double u0 = 1e300, v0 = 1e300, u1 = -1e300, v1 = -1e300;
  for (const auto& c : box.corners()) {
    const auto p = project_point(cam, c);
    if (!p) return std::nullopt;
    u0 = std::min(u0, p->u);
    v0 = std::min(v0, p->v);
    u1 = std::max(u1, p->u);
    v1 = std::max(v1, p->v);
  }
  const double w = cam.width_px, h = cam.height_px;
  PvBox b{std::clamp(u0, 0.0, w), std::clamp(v0, 0.0, h), std::clamp(u1, 0.0, w),
          std::clamp(v1, 0.0, h)};
  if (!(b.width() > 0 && b.height() > 0)) return std::nullopt;
  return b;
}

TEST(ProjectBoxPv, MatchesCornerBruteForce) {
  const CameraModel cam = full_res_camera();
  const Box3 box = ground_box(0, 20, 0.0, 4.0, 2.0, 1.5);
  ASSERT_DOUBLE_EQ(box.center.z(), 0.75);
  const auto got = project_box_pv(cam, box);
  const auto want = brute_force_hull(cam, box);
  ASSERT_TRUE(got && want);
  EXPECT_EQ(*got, *want);
}

TEST(ProjectBoxPv, RandomBoxesMatchCornerBruteForce) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ux(-25, 25), uy(1, 60), uyaw(-kPi, kPi), ul(3.5, 5.5),
      uw(1.6, 2.2), uh(1.4, 2.0);
  const CameraModel cam{256, 192, 110.0, 1.6, 0.0};
  int compared = 0;
  for (int i = 0; i < 2000; ++i) {
    const Box3 box = ground_box(ux(rng), uy(rng), uyaw(rng), ul(rng), uw(rng), uh(rng));
    const auto want = brute_force_hull(cam, box);
    bool all_front = true;
    for (const auto& c : box.corners()) all_front &= ego_to_camera(cam, c).z() > kNearPlaneM;
    if (!all_front) continue;
    const auto got = project_box_pv(cam, box);
    ASSERT_EQ(got.has_value(), want.has_value());
    if (got) EXPECT_EQ(*got, *want);
    ++compared;
  }
  EXPECT_GT(compared, 1000);
}

TEST(ProjectBoxPv, StraddlingNearPlaneIsClippedNotDropped) {
  // Box beside the camera reaching behind it: some corners are behind.
  const auto b = project_box_pv(full_res_camera(), ground_box(3.0, 1.0, kPi / 2, 5.0, 2.0, 1.5));
  ASSERT_TRUE(b);
  EXPECT_GE(b->u_min, 0.0);
  EXPECT_LE(b->u_max, 1024.0);
  EXPECT_LE(b->v_max, 768.0);
}

TEST(FootprintBev, PointTenMetersAhead) {
  const auto b = footprint_bev(BevGrid{}, ground_box(0, 10, kPi / 2, 1e-6, 1e-6, 1e-6));
  ASSERT_TRUE(b);
  EXPECT_NEAR(b->center().u, 100.0, 1e-9);
  EXPECT_NEAR(b->center().v, 159.0, 1e-9);
}

TEST(FootprintBev, EgoBoxCenteredAtAnchor) {
  const auto b = footprint_bev(BevGrid{}, ground_box(0, 0, kPi / 2, 4.0, 1.8, 1.5));
  ASSERT_TRUE(b);
  EXPECT_NEAR(b->u_min + b->u_max, 200.0, 1e-9);
  // clipped at the bottom edge of the grid
  EXPECT_DOUBLE_EQ(b->v_max, 200.0);
  EXPECT_NEAR(b->v_min, 199.0 - 8.0, 1e-9);
}

TEST(FootprintBev, SixtyMetersAheadIsAbsent) {
  EXPECT_FALSE(footprint_bev(BevGrid{}, ground_box(0, 60, kPi / 2, 4.0, 1.8, 1.5)));
}

TEST(FootprintBev, LateralMirroring) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ux(-20, 20), uy(2, 45), uyaw(-kPi, kPi);
  const BevGrid g;
  for (int i = 0; i < 200; ++i) {
    const double x = ux(rng), y = uy(rng), yaw = uyaw(rng);
    const auto a = footprint_bev(g, ground_box(x, y, yaw, 4.5, 1.9, 1.5));
    const auto b = footprint_bev(g, ground_box(-x, y, kPi - yaw, 4.5, 1.9, 1.5));
    ASSERT_EQ(a.has_value(), b.has_value());
    if (!a) continue;
    const bool clipped = a->u_min <= 0 || a->u_max >= 200 || b->u_min <= 0 || b->u_max >= 200;
    if (clipped) continue;
    EXPECT_NEAR(a->u_min, 200.0 - b->u_max, 1e-9);
    EXPECT_NEAR(a->u_max, 200.0 - b->u_min, 1e-9);
    EXPECT_NEAR(a->v_min, b->v_min, 1e-9);
    EXPECT_NEAR(a->v_max, b->v_max, 1e-9);
  }
}

TEST(Homography, RoundTripOverRandomGroundPoints) {
  const CameraModel cam = full_res_camera();
  const BevGrid grid;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> ux(-25, 25), uy(2, 50);
  int checked = 0;
  double worst = 0.0;
  while (checked < 1000) {
    const double x = ux(rng), y = uy(rng);
    const auto px = project_point(cam, {x, y, 0.0});
    if (!px || px->u < 0 || px->u > cam.width_px || px->v < 0 || px->v > cam.height_px) continue;
    const PixelPoint want = grid.ground_to_pixel(x, y);
    if (want.v < 0.0) continue;  // beyond the far edge of the grid
    const auto bev = ipm_ground(cam, grid, *px);
    ASSERT_TRUE(bev);
    worst = std::max({worst, std::abs(bev->u - want.u), std::abs(bev->v - want.v)});
    ++checked;
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Homography, HasFullRank) {
  const Eigen::Matrix3d h = homography_matrix(full_res_camera(), BevGrid{});
  EXPECT_EQ(Eigen::FullPivLU<Eigen::Matrix3d>(h).rank(), 3);
}

TEST(Homography, BottomCenterPixel) {
  const auto p = ipm_ground(full_res_camera(), BevGrid{}, {512.0, 768.0});
  ASSERT_TRUE(p);
  EXPECT_NEAR(p->u, 100.0, 1e-9);
  EXPECT_NEAR(p->v, 193.0248956739438, 1e-9);
  const auto ray = ray_ground(full_res_camera(), 512.0, 768.0);
  EXPECT_NEAR(p->v, 199.0 - 4.0 * ray->y(), 1e-9);
}

TEST(Homography, HorizonAndSkyAreAbsent) {
  const CameraModel cam = full_res_camera();
  EXPECT_FALSE(ipm_ground(cam, BevGrid{}, {512.0, 384.0}));
  EXPECT_FALSE(ipm_ground(cam, BevGrid{}, {100.0, 200.0}));
}

TEST(Homography, FarGroundOutsideGridIsAbsent) {
  // just below the horizon: far beyond 50 m
  EXPECT_FALSE(ipm_ground(full_res_camera(), BevGrid{}, {512.0, 386.0}));
}

TEST(Homography, SingularConfigurations) {
  CameraModel cam = full_res_camera();
  cam.cam_height_m = 0.0;
  EXPECT_THROW(homography_matrix(cam, BevGrid{}), SingularConfiguration);
  cam = full_res_camera();
  cam.pitch_deg = -60.0;  // looking at the sky
  EXPECT_THROW(homography_matrix(cam, BevGrid{}), SingularConfiguration);
}

TEST(Homography, PitchedCameraRoundTrip) {
  CameraModel cam = full_res_camera();
  cam.pitch_deg = 8.0;
  const BevGrid grid;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ux(-10, 10), uy(4, 45);
  for (int i = 0; i < 200; ++i) {
    const double x = ux(rng), y = uy(rng);
    const auto px = project_point(cam, {x, y, 0.0});
    ASSERT_TRUE(px);
    const auto bev = apply_homography(homography_matrix(cam, grid), *px);
    ASSERT_TRUE(bev);
    EXPECT_NEAR(bev->u, grid.ground_to_pixel(x, y).u, 1e-6);
    EXPECT_NEAR(bev->v, grid.ground_to_pixel(x, y).v, 1e-6);
  }
}

TEST(WorldToEgo, LaneAlignedVehicleBecomesLongitudinal) {
  const Pose2 ego{2.0, 100.0, kPi / 2};
  const Box3 world = ground_box(2.0, 120.0, kPi / 2, 4.5, 1.8, 1.5);
  const Box3 e = world_to_ego(ego, world);
  EXPECT_NEAR(e.center.x(), 0.0, 1e-12);
  EXPECT_NEAR(e.center.y(), 20.0, 1e-12);
  EXPECT_NEAR(e.yaw_rad, kPi / 2, 1e-12);
}

TEST(NormalizeAngle, RangeIsHalfOpen) {
  EXPECT_DOUBLE_EQ(normalize_angle(kPi), kPi);
  EXPECT_DOUBLE_EQ(normalize_angle(-kPi), kPi);
  EXPECT_NEAR(normalize_angle(3 * kPi / 2), -kPi / 2, 1e-12);
}

TEST(Box3, RejectsNonPositiveDimensions) {
  Box3 b = ground_box(0, 10, 0, 4, 2, 1.5);
  b.width_m = 0;
  EXPECT_THROW(b.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace bevloc
