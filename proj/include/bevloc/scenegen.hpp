#ifndef BEVLOC_SCENEGEN_HPP_
#define BEVLOC_SCENEGEN_HPP_

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "bevloc/geometry.hpp"
#include "bevloc/image.hpp"

namespace bevloc {

enum class WeatherKind { Morning, Midday, Afternoon, Night, Default };

/// Ordinal weather levels on a [0, 1] scale.
inline constexpr double kLevelLow = 0.2;
inline constexpr double kLevelMedium = 0.5;
inline constexpr double kLevelHigh = 0.8;

struct WeatherPreset {
  WeatherKind kind = WeatherKind::Default;
  std::string_view name;
  double cloudiness = kLevelLow;
  double precipitation = kLevelLow;
  double wind = kLevelLow;
  double sun_altitude_deg = 0.0;
};

/// Morning, Midday, Afternoon, Night, Default in that order.
const std::array<WeatherPreset, 5>& weather_presets();

struct VehicleType {
  int id = 0;
  std::string name;
  double length_m = 4.5;
  double width_m = 1.8;
  double height_m = 1.5;
  Rgb8 color;
};

/// Fixed catalogue of 26 vehicle types. Dimensions are drawn once from
/// length 3.5-5.5 m, width 1.6-2.2 m, height 1.4-2.0 m.
const std::vector<VehicleType>& vehicle_types();

struct SceneConfig {
  int num_background_vehicles = 100;
  int num_lanes = 4;
  double lane_width_m = 3.5;
  int vehicle_type_count = 26;
  double road_length_m = 400.0;  // the road is a ring of this length
  double min_speed_mps = 5.0;
  double max_speed_mps = 15.0;
  double yaw_jitter_deg = 3.0;
  double lateral_jitter_m = 0.3;
  double tick_s = 1.0 / 30.0;
  CameraModel camera{256, 192, 110.0, 1.6, 0.0};
  BevGrid grid;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Vehicle {
  int id = 0;
  int type_id = 0;
  int lane = 0;
  Box3 box;  // world frame
  double speed_mps = 0.0;
};

/// Straight multi-lane road running along world +y. Lane i is centered at
/// x = (i - (num_lanes - 1) / 2) * lane_width. Every vehicle in a lane moves
/// at that lane's speed, so footprints that start disjoint stay disjoint.
struct Scene {
  Pose2 ego;
  Vehicle ego_vehicle;
  std::vector<Vehicle> others;
  std::vector<double> lane_speeds;
  WeatherPreset weather = weather_presets()[4];
  double timestamp = 0.0;
  double road_length_m = 400.0;
  int num_lanes = 4;
  double lane_width_m = 3.5;
  bool placement_saturated = false;

  double lane_center_x(int lane) const;
  /// Ego-frame box of a world vehicle, taking the shortest way around the ring.
  Box3 to_ego_frame(const Vehicle& v) const;
  /// Center distance on the ground plane, shortest way around the ring.
  double distance_to_ego(const Vehicle& v) const;
  std::vector<Box3> others_in_ego_frame() const;
};

/// True when the two ground footprints intersect. `ring_length` > 0 wraps
/// the y axis.
bool footprints_overlap(const Box3& a, const Box3& b, double ring_length = 0.0);

Scene sample_scene(const SceneConfig& cfg, std::mt19937_64& rng);

/// Replaces the ego with a fresh one placed clear of every other vehicle.
void respawn_ego(Scene& scene, const SceneConfig& cfg, std::mt19937_64& rng);

/// Moves every vehicle (ego included) along its lane.
void advance(Scene& scene, double dt_s);

// ---------------------------------------------------------------------------
// Rendering

inline constexpr double kFarPlaneM = 1000.0;

struct PvRender {
  RgbImage rgb;
  std::vector<std::int32_t> vehicle_index;  // index into Scene::others, -1 elsewhere
};

/// Flat-shaded raster of the scene: sky, road with lane lines, vehicles
/// painted back to front. Weather scales brightness, adds speckle noise
/// driven by `noise_seed` and tints the night preset.
PvRender render_pv_layers(const Scene& scene, const CameraModel& cam,
                          std::uint64_t noise_seed);
RgbImage render_pv(const Scene& scene, const CameraModel& cam, std::uint64_t noise_seed);

/// Ray-cast distance to the nearest surface divided by kFarPlaneM, clamped
/// to [0, 1]. Rays through pixel centers.
DepthMap render_depth(const Scene& scene, const CameraModel& cam);

// ---------------------------------------------------------------------------
// Annotation and acquisition

inline constexpr double kAnnotationRadiusM = 50.0;

struct SceneRecord {
  int id = 0;
  std::string name;
  double distance_m = 0.0;
  double timestamp = 0.0;
  std::shared_ptr<const RgbImage> rgb;
  std::shared_ptr<const DepthMap> depth;
  PvBox bbox_rgb;
  BevBox bbox_bev;
  double ego_speed = 0.0;
};

/// One record per non-ego vehicle within the annotation radius whose PV and
/// BEV boxes both exist. Occluded vehicles are kept. Images are left unset.
std::vector<SceneRecord> annotate(const Scene& scene, const CameraModel& cam,
                                  const BevGrid& grid);

/// Throws std::invalid_argument naming the violated invariant.
void validate_record(const SceneRecord& rec, const CameraModel& cam, const BevGrid& grid);

struct AcquisitionProtocol {
  int maps = 6;
  int egos_per_map = 20;
  int frames_per_ego = 20;
  int weathers = 5;
  int skip = 5;

  void validate() const;
  std::size_t frame_count() const;
};

struct FrameIndex {
  int map = 0;
  int ego = 0;
  int frame = 0;
  int weather = 0;
  bool operator==(const FrameIndex&) const = default;
};

struct Frame {
  FrameIndex index;
  std::size_t sequence = 0;
  double timestamp = 0.0;
  double ego_speed = 0.0;
  WeatherKind weather = WeatherKind::Default;
  bool placement_saturated = false;
  std::shared_ptr<const RgbImage> rgb;
  std::shared_ptr<const DepthMap> depth;
  std::vector<SceneRecord> records;
};

struct AcquisitionOptions {
  unsigned workers = 1;
  bool render = true;  // false leaves rgb/depth empty
};

/// Frames are emitted in sequence order: map, ego, weather, frame.
using FrameSink = std::function<void(Frame&&)>;

/// Runs the full protocol; between stored frames the world advances
/// skip + 1 ticks. Output is a pure function of (cfg, protocol).
void run_acquisition(const SceneConfig& cfg, const AcquisitionProtocol& protocol,
                     const FrameSink& sink, const AcquisitionOptions& options = {});

/// Scene as it is captured at `index`.
Scene scene_at(const SceneConfig& cfg, const AcquisitionProtocol& protocol,
               const FrameIndex& index);

/// Per-frame random stream derived from (seed, map, ego, frame, weather).
std::mt19937_64 frame_rng(std::uint64_t seed, const FrameIndex& index);

}  // namespace bevloc

#endif  // BEVLOC_SCENEGEN_HPP_
