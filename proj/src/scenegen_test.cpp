#include "bevloc/scenegen.hpp"

#include <cmath>
#include <numbers>
#include <set>

#include <gtest/gtest.h>

namespace bevloc {
namespace {

constexpr double kPi = std::numbers::pi;

SceneConfig desk_config(int vehicles = 100) {
  SceneConfig c;
  c.num_background_vehicles = vehicles;
  c.seed = 42;
  return c;
}

// Ego alone on the road, at a known world position facing +y.
Scene lone_ego() {
  SceneConfig cfg = desk_config(0);
  std::mt19937_64 rng(1);
  Scene s = sample_scene(cfg, rng);
  s.ego = {s.lane_center_x(1), 100.0, kPi / 2};
  s.ego_vehicle.box.center = {s.ego.x_m, s.ego.y_m, s.ego_vehicle.box.height_m / 2};
  s.ego_vehicle.box.yaw_rad = kPi / 2;
  s.weather = weather_presets()[4];
  return s;
}

Vehicle vehicle_at(int id, double x, double y, double l = 4.5, double w = 1.8, double h = 1.5) {
  Vehicle v;
  v.id = id;
  v.type_id = id % 26;
  v.box = ground_box(x, y, kPi / 2, l, w, h);
  return v;
}

// Independent rectangle overlap: corner containment plus edge crossing.
bool inside(const std::array<Eigen::Vector2d, 4>& poly, const Eigen::Vector2d& p) {
  bool pos = false, neg = false;
  for (int i = 0; i < 4; ++i) {
    const Eigen::Vector2d a = poly[i], b = poly[(i + 1) % 4];
    const double cross = (b - a).x() * (p - a).y() - (b - a).y() * (p - a).x();
    pos |= cross > 0;
    neg |= cross < 0;
  }
  return !(pos && neg);
}

bool segments_cross(Eigen::Vector2d p1, Eigen::Vector2d p2, Eigen::Vector2d q1,
                    Eigen::Vector2d q2) {
  const auto orient = [](Eigen::Vector2d a, Eigen::Vector2d b, Eigen::Vector2d c) {
    return (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
  };
  return orient(p1, p2, q1) * orient(p1, p2, q2) < 0 && orient(q1, q2, p1) * orient(q1, q2, p2) < 0;
}

bool rectangles_overlap(const std::array<Eigen::Vector2d, 4>& a,
                        const std::array<Eigen::Vector2d, 4>& b) {
  for (const auto& p : a) if (inside(b, p)) return true;
  for (const auto& p : b) if (inside(a, p)) return true;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (segments_cross(a[i], a[(i + 1) % 4], b[j], b[(j + 1) % 4])) return true;
  return false;
}

TEST(WeatherPresets, MatchTable) {
  const auto& w = weather_presets();
  ASSERT_EQ(w.size(), 5u);
  EXPECT_EQ(w[0].name, "Morning");
  EXPECT_DOUBLE_EQ(w[0].cloudiness, kLevelLow);
  EXPECT_DOUBLE_EQ(w[0].precipitation, kLevelHigh);
  EXPECT_DOUBLE_EQ(w[0].wind, kLevelMedium);
  EXPECT_DOUBLE_EQ(w[0].sun_altitude_deg, 30);
  EXPECT_EQ(w[1].name, "Midday");
  EXPECT_DOUBLE_EQ(w[1].cloudiness, kLevelMedium);
  EXPECT_DOUBLE_EQ(w[1].precipitation, kLevelLow);
  EXPECT_DOUBLE_EQ(w[1].sun_altitude_deg, 80);
  EXPECT_EQ(w[2].name, "Afternoon");
  EXPECT_DOUBLE_EQ(w[2].cloudiness, kLevelHigh);
  EXPECT_DOUBLE_EQ(w[2].sun_altitude_deg, 320);
  EXPECT_EQ(w[3].name, "Night");
  EXPECT_DOUBLE_EQ(w[3].precipitation, kLevelMedium);
  EXPECT_DOUBLE_EQ(w[3].sun_altitude_deg, 300);
  EXPECT_EQ(w[4].name, "Default");
  EXPECT_DOUBLE_EQ(w[4].wind, kLevelLow);
  EXPECT_DOUBLE_EQ(w[4].sun_altitude_deg, 0);
  EXPECT_DOUBLE_EQ(kLevelLow, 0.2);
  EXPECT_DOUBLE_EQ(kLevelMedium, 0.5);
  EXPECT_DOUBLE_EQ(kLevelHigh, 0.8);
}

TEST(VehicleTypes, TwentySixWithinDimensionRanges) {
  const auto& t = vehicle_types();
  ASSERT_EQ(t.size(), 26u);
  std::set<std::string> names;
  for (const auto& v : t) {
    names.insert(v.name);
    EXPECT_GE(v.length_m, 3.5);
    EXPECT_LE(v.length_m, 5.5);
    EXPECT_GE(v.width_m, 1.6);
    EXPECT_LE(v.width_m, 2.2);
    EXPECT_GE(v.height_m, 1.4);
    EXPECT_LE(v.height_m, 2.0);
  }
  EXPECT_EQ(names.size(), 26u);
}

TEST(SampleScene, ZeroBackgroundVehicles) {
  std::mt19937_64 rng(3);
  const Scene s = sample_scene(desk_config(0), rng);
  EXPECT_TRUE(s.others.empty());
  EXPECT_FALSE(s.placement_saturated);
}

TEST(SampleScene, Deterministic) {
  std::mt19937_64 a(9), b(9);
  const Scene sa = sample_scene(desk_config(), a);
  const Scene sb = sample_scene(desk_config(), b);
  ASSERT_EQ(sa.others.size(), sb.others.size());
  for (std::size_t i = 0; i < sa.others.size(); ++i) {
    EXPECT_EQ(sa.others[i].box.center, sb.others[i].box.center);
    EXPECT_EQ(sa.others[i].type_id, sb.others[i].type_id);
  }
}

TEST(SampleScene, FootprintsPairwiseDisjoint) {
  for (std::uint64_t seed : {1, 2, 3}) {
    std::mt19937_64 rng(seed);
    const Scene s = sample_scene(desk_config(), rng);
    EXPECT_EQ(s.others.size(), 100u);
    std::vector<Vehicle> all = s.others;
    all.push_back(s.ego_vehicle);
    for (std::size_t i = 0; i < all.size(); ++i) {
      for (std::size_t j = i + 1; j < all.size(); ++j) {
        // compare with b moved to the nearest copy around the ring
        Box3 b = all[j].box;
        double dy = b.center.y() - all[i].box.center.y();
        dy -= s.road_length_m * std::round(dy / s.road_length_m);
        b.center.y() = all[i].box.center.y() + dy;
        ASSERT_FALSE(rectangles_overlap(all[i].box.ground_corners(), b.ground_corners()))
            << "vehicles " << all[i].id << " and " << all[j].id;
      }
    }
  }
}

TEST(SampleScene, VehiclesStayOnTheirLanes) {
  std::mt19937_64 rng(4);
  const Scene s = sample_scene(desk_config(), rng);
  for (const auto& v : s.others) {
    for (const auto& c : v.box.ground_corners()) {
      EXPECT_LE(std::abs(c.x() - s.lane_center_x(v.lane)), s.lane_width_m / 2);
    }
    EXPECT_DOUBLE_EQ(v.speed_mps, s.lane_speeds[v.lane]);
  }
}

TEST(SampleScene, SaturationIsFlagged) {
  SceneConfig cfg = desk_config(2000);
  std::mt19937_64 rng(5);
  const Scene s = sample_scene(cfg, rng);
  EXPECT_TRUE(s.placement_saturated);
  EXPECT_LT(s.others.size(), 2000u);
}

TEST(FootprintsOverlap, AgreesWithIndependentOracle) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> ux(-4, 4), uy(-6, 6), uyaw(-kPi, kPi);
  int hits = 0;
  for (int i = 0; i < 3000; ++i) {
    const Box3 a = ground_box(0, 0, uyaw(rng), 4.5, 1.8, 1.5);
    const Box3 b = ground_box(ux(rng), uy(rng), uyaw(rng), 4.0, 2.0, 1.5);
    const bool want = rectangles_overlap(a.ground_corners(), b.ground_corners());
    EXPECT_EQ(footprints_overlap(a, b), want);
    hits += want;
  }
  EXPECT_GT(hits, 100);
}

TEST(Advance, LanesMoveRigidly) {
  std::mt19937_64 rng(8);
  Scene s = sample_scene(desk_config(), rng);
  const Scene before = s;
  advance(s, 2.5);
  EXPECT_DOUBLE_EQ(s.timestamp, before.timestamp + 2.5);
  for (std::size_t i = 0; i < s.others.size(); ++i) {
    double dy = s.others[i].box.center.y() - before.others[i].box.center.y();
    dy -= s.road_length_m * std::round(dy / s.road_length_m);
    EXPECT_NEAR(dy, 2.5 * s.others[i].speed_mps, 1e-9);
  }
}

TEST(RenderPv, EmptySceneHasNoVehiclePixels) {
  const Scene s = lone_ego();
  const CameraModel cam = desk_config().camera;
  const PvRender r = render_pv_layers(s, cam, 1);
  for (auto idx : r.vehicle_index) ASSERT_EQ(idx, -1);

  Scene behind = s;
  behind.others.push_back(vehicle_at(1, s.ego.x_m, s.ego.y_m - 20));
  EXPECT_EQ(render_pv(behind, cam, 1), r.rgb);
}

TEST(RenderPv, VehiclePixelsInsideProjectedHull) {
  Scene s = lone_ego();
  s.others.push_back(vehicle_at(1, s.ego.x_m, s.ego.y_m + 12));
  const CameraModel cam = desk_config().camera;
  const PvRender r = render_pv_layers(s, cam, 1);
  const auto hull = project_box_pv(cam, s.to_ego_frame(s.others[0]));
  ASSERT_TRUE(hull);
  int count = 0;
  for (int y = 0; y < cam.height_px; ++y) {
    for (int x = 0; x < cam.width_px; ++x) {
      if (r.vehicle_index[static_cast<std::size_t>(y) * cam.width_px + x] != 0) continue;
      ++count;
      EXPECT_GE(x + 0.5, hull->u_min);
      EXPECT_LE(x + 0.5, hull->u_max);
      EXPECT_GE(y + 0.5, hull->v_min);
      EXPECT_LE(y + 0.5, hull->v_max);
    }
  }
  EXPECT_GT(count, 50);
}

TEST(RenderPv, Deterministic) {
  std::mt19937_64 rng(10);
  const Scene s = sample_scene(desk_config(), rng);
  const CameraModel cam = desk_config().camera;
  EXPECT_EQ(render_pv(s, cam, 77), render_pv(s, cam, 77));
}

TEST(RenderPv, WeatherChangesTheImage) {
  Scene s = lone_ego();
  const CameraModel cam = desk_config().camera;
  s.weather = weather_presets()[1];
  const RgbImage midday = render_pv(s, cam, 3);
  s.weather = weather_presets()[3];
  const RgbImage night = render_pv(s, cam, 3);
  EXPECT_NE(midday, night);
  double sum_mid = 0, sum_night = 0;
  for (auto b : midday.bytes()) sum_mid += b;
  for (auto b : night.bytes()) sum_night += b;
  EXPECT_GT(sum_mid, sum_night);
}

TEST(RenderDepth, SkyIsFarPlane) {
  const Scene s = lone_ego();
  const CameraModel cam = desk_config().camera;
  const DepthMap d = render_depth(s, cam);
  EXPECT_FLOAT_EQ(d.at(cam.width_px / 2, 0), 1.0f);
}

TEST(RenderDepth, GroundMatchesRayPlaneDistance) {
  const Scene s = lone_ego();
  const CameraModel cam = desk_config().camera;
  const DepthMap d = render_depth(s, cam);
  const double f = cam.focal_px();
  for (int row : {110, 150, 191}) {
    const int col = cam.width_px / 2;
    const double dx = (col + 0.5 - cam.cx()) / f, dy = (row + 0.5 - cam.cy()) / f;
    const double dist = cam.cam_height_m * std::sqrt(dx * dx + dy * dy + 1.0) / dy;
    EXPECT_NEAR(d.at(col, row), dist / kFarPlaneM, 1e-7);
  }
}

TEST(RenderDepth, FrontFaceAtTwentyMeters) {
  Scene s = lone_ego();
  const double len = 4.5, h = 1.5;
  s.others.push_back(vehicle_at(1, s.ego.x_m, s.ego.y_m + 20 + len / 2, len, 1.8, h));
  const CameraModel cam = desk_config().camera;
  const auto px = project_point(cam, {0.0, 20.0, h / 2});
  ASSERT_TRUE(px);
  const DepthMap d = render_depth(s, cam);
  EXPECT_NEAR(d.at(static_cast<int>(px->u), static_cast<int>(px->v)), 0.02, 2e-5);
}

TEST(Annotate, RadiusRule) {
  Scene s = lone_ego();
  s.others.push_back(vehicle_at(1, s.ego.x_m + 7.0, s.ego.y_m + 49.8));  // 50.29 m
  s.others.push_back(vehicle_at(2, s.ego.x_m, s.ego.y_m + 55.0));
  s.others.push_back(vehicle_at(3, s.ego.x_m + 3.5, s.ego.y_m + 30.0));
  const auto recs = annotate(s, desk_config().camera, BevGrid{});
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].id, 3);
  EXPECT_NEAR(recs[0].distance_m, std::hypot(3.5, 30.0), 1e-9);
}

TEST(Annotate, OccludedVehicleStillEmitted) {
  Scene s = lone_ego();
  s.others.push_back(vehicle_at(1, s.ego.x_m, s.ego.y_m + 15, 10.0, 2.5, 3.5));  // truck
  s.others.push_back(vehicle_at(2, s.ego.x_m, s.ego.y_m + 30));
  const CameraModel cam = desk_config().camera;
  const PvRender r = render_pv_layers(s, cam, 1);
  for (auto idx : r.vehicle_index) ASSERT_NE(idx, 1) << "the car should be hidden";
  const auto recs = annotate(s, cam, BevGrid{});
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[1].id, 2);
}

TEST(Annotate, CountMatchesBruteForceFilter) {
  const CameraModel cam = desk_config().camera;
  const BevGrid grid;
  for (std::uint64_t seed : {11, 12, 13, 14}) {
    std::mt19937_64 rng(seed);
    const Scene s = sample_scene(desk_config(), rng);
    std::size_t want = 0;
    for (const auto& v : s.others) {
      double dy = v.box.center.y() - s.ego.y_m;
      dy -= s.road_length_m * std::round(dy / s.road_length_m);
      const double dx = v.box.center.x() - s.ego.x_m;
      if (std::hypot(dx, dy) > 50.0) continue;
      const Box3 local = ground_box(dx, dy, v.box.yaw_rad, v.box.length_m, v.box.width_m,
                                    v.box.height_m);
      if (project_box_pv(cam, local) && footprint_bev(grid, local)) ++want;
    }
    const auto recs = annotate(s, cam, grid);
    EXPECT_EQ(recs.size(), want);
    for (const auto& r : recs) EXPECT_NO_THROW(validate_record(r, cam, grid));
  }
}

TEST(Acquisition, FrameCounts) {
  EXPECT_EQ((AcquisitionProtocol{6, 20, 20, 5, 5}.frame_count()), 12000u);
  EXPECT_EQ((AcquisitionProtocol{2, 5, 10, 5, 5}.frame_count()), 500u);
  std::size_t n = 0;
  run_acquisition(desk_config(), {1, 1, 1, 1, 5}, [&](Frame&&) { ++n; });
  EXPECT_EQ(n, 1u);
  n = 0;
  run_acquisition(desk_config(), {2, 5, 10, 5, 5}, [&](Frame&&) { ++n; },
                  AcquisitionOptions{1, false});
  EXPECT_EQ(n, 500u);
}

TEST(Acquisition, RejectsNonPositiveCounts) {
  EXPECT_THROW(run_acquisition(desk_config(), {0, 1, 1, 1, 5}, [](Frame&&) {}),
               std::invalid_argument);
}

TEST(Acquisition, SequenceOrderAndFrameSharing) {
  std::vector<Frame> frames;
  run_acquisition(desk_config(), {1, 2, 3, 2, 5}, [&](Frame&& f) { frames.push_back(std::move(f)); });
  ASSERT_EQ(frames.size(), 12u);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    EXPECT_EQ(frames[i].sequence, i);
    for (const auto& r : frames[i].records) {
      EXPECT_EQ(r.rgb.get(), frames[i].rgb.get());
      EXPECT_EQ(r.depth.get(), frames[i].depth.get());
    }
  }
  EXPECT_EQ(frames[0].index, (FrameIndex{0, 0, 0, 0}));
  EXPECT_EQ(frames[3].index, (FrameIndex{0, 0, 0, 1}));
  EXPECT_EQ(frames[6].index, (FrameIndex{0, 1, 0, 0}));
  // the world keeps moving between stored frames
  EXPECT_NEAR(frames[1].timestamp - frames[0].timestamp, 6.0 / 30.0, 1e-9);
}

TEST(Acquisition, PureFunctionOfConfig) {
  const AcquisitionProtocol p{1, 2, 2, 2, 5};
  std::vector<Frame> a, b, c;
  run_acquisition(desk_config(), p, [&](Frame&& f) { a.push_back(std::move(f)); });
  run_acquisition(desk_config(), p, [&](Frame&& f) { b.push_back(std::move(f)); });
  run_acquisition(desk_config(), p, [&](Frame&& f) { c.push_back(std::move(f)); },
                  AcquisitionOptions{3, true});
  ASSERT_EQ(a.size(), b.size());
  ASSERT_EQ(a.size(), c.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(*a[i].rgb, *b[i].rgb);
    EXPECT_EQ(*a[i].rgb, *c[i].rgb);
    EXPECT_EQ(*a[i].depth, *c[i].depth);
    ASSERT_EQ(a[i].records.size(), c[i].records.size());
    for (std::size_t k = 0; k < a[i].records.size(); ++k) {
      EXPECT_EQ(a[i].records[k].bbox_rgb, c[i].records[k].bbox_rgb);
      EXPECT_EQ(a[i].records[k].bbox_bev, c[i].records[k].bbox_bev);
    }
  }
  const Scene at = scene_at(desk_config(), p, a[5].index);
  EXPECT_EQ(annotate(at, desk_config().camera, BevGrid{}).size(), a[5].records.size());
}

TEST(Acquisition, VerticalExtentVariesMore) {
  std::vector<double> us, vs;
  run_acquisition(desk_config(), {2, 5, 10, 5, 5},
                  [&](Frame&& f) {
                    for (const auto& r : f.records) {
                      us.push_back(r.bbox_bev.width());
                      vs.push_back(r.bbox_bev.height());
                    }
                  },
                  AcquisitionOptions{1, false});
  ASSERT_GE(us.size(), 1000u);
  const auto sd = [](const std::vector<double>& x) {
    double m = 0, s = 0;
    for (double v : x) m += v;
    m /= x.size();
    for (double v : x) s += (v - m) * (v - m);
    return std::sqrt(s / x.size());
  };
  EXPECT_GT(sd(vs), sd(us));
}

}  // namespace
}  // namespace bevloc
