#include "bevloc/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numbers>
#include <stdexcept>
#include <string>

namespace bevloc {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kHeadingAlongRoad = std::numbers::pi / 2.0;
constexpr double kLongitudinalGapM = 1.0;
constexpr double kEgoYawJitterDeg = 2.0;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(std::mt19937_64& rng, int lo, int hi_inclusive) {
  return std::uniform_int_distribution<int>(lo, hi_inclusive)(rng);
}

double wrap_positive(double y, double length) {
  double r = std::fmod(y, length);
  if (r < 0.0) r += length;
  return r;
}

// Shortest signed offset of `y` relative to `origin` on a ring.
double ring_offset(double y, double origin, double length) {
  double d = std::fmod(y - origin, length);
  if (d >= 0.5 * length) d -= length;
  if (d < -0.5 * length) d += length;
  return d;
}

bool separated_on_axis(const std::array<Eigen::Vector2d, 4>& a,
                       const std::array<Eigen::Vector2d, 4>& b, const Eigen::Vector2d& axis) {
  double a0 = a[0].dot(axis), a1 = a0, b0 = b[0].dot(axis), b1 = b0;
  for (int i = 1; i < 4; ++i) {
    a0 = std::min(a0, a[i].dot(axis));
    a1 = std::max(a1, a[i].dot(axis));
    b0 = std::min(b0, b[i].dot(axis));
    b1 = std::max(b1, b[i].dot(axis));
  }
  return a1 < b0 || b1 < a0;
}

Vehicle make_vehicle(const SceneConfig& cfg, std::mt19937_64& rng, int id, int lane,
                     double y, const Scene& scene) {
  const auto& types = vehicle_types();
  const int type_id = uniform_int(rng, 0, cfg.vehicle_type_count - 1);
  const VehicleType& t = types[type_id];
  const double x = scene.lane_center_x(lane) +
                   uniform(rng, -cfg.lateral_jitter_m, cfg.lateral_jitter_m);
  const double yaw = kHeadingAlongRoad +
                     uniform(rng, -cfg.yaw_jitter_deg, cfg.yaw_jitter_deg) * kDegToRad;
  Vehicle v;
  v.id = id;
  v.type_id = type_id;
  v.lane = lane;
  v.box = ground_box(x, y, yaw, t.length_m, t.width_m, t.height_m);
  v.speed_mps = scene.lane_speeds[lane];
  return v;
}

// Placement test with a longitudinal safety gap.
bool clear_of(const Vehicle& cand, const Scene& scene, const Vehicle* ego,
              std::size_t n_others) {
  Box3 padded = cand.box;
  padded.length_m += 2.0 * kLongitudinalGapM;
  if (ego && footprints_overlap(padded, ego->box, scene.road_length_m)) return false;
  for (std::size_t i = 0; i < n_others; ++i) {
    if (footprints_overlap(padded, scene.others[i].box, scene.road_length_m)) return false;
  }
  return true;
}

}  // namespace

const std::array<WeatherPreset, 5>& weather_presets() {
  static const std::array<WeatherPreset, 5> kPresets = {{
      {WeatherKind::Morning, "Morning", kLevelLow, kLevelHigh, kLevelMedium, 30.0},
      {WeatherKind::Midday, "Midday", kLevelMedium, kLevelLow, kLevelMedium, 80.0},
      {WeatherKind::Afternoon, "Afternoon", kLevelHigh, kLevelLow, kLevelMedium, 320.0},
      {WeatherKind::Night, "Night", kLevelMedium, kLevelMedium, kLevelMedium, 300.0},
      {WeatherKind::Default, "Default", kLevelLow, kLevelLow, kLevelLow, 0.0},
  }};
  return kPresets;
}

const std::vector<VehicleType>& vehicle_types() {
  static const std::vector<VehicleType> kTypes = [] {
    static constexpr std::array<const char*, 26> kNames = {
        "compact.hatchback", "compact.city",     "sedan.mid",       "sedan.full",
        "sedan.sport",       "coupe.two_door",   "coupe.grand",     "wagon.estate",
        "suv.compact",       "suv.mid",          "suv.full",        "crossover.small",
        "crossover.mid",     "pickup.single",    "pickup.crew",     "van.mini",
        "van.cargo",         "van.passenger",    "roadster.open",   "muscle.classic",
        "microcar.urban",    "taxi.sedan",       "police.interceptor", "ambulance.light",
        "utility.offroad",   "luxury.limousine",
    };
    std::mt19937_64 rng(0x7e1c1e5ULL);
    std::vector<VehicleType> out;
    out.reserve(kNames.size());
    for (std::size_t i = 0; i < kNames.size(); ++i) {
      VehicleType t;
      t.id = static_cast<int>(i);
      t.name = kNames[i];
      t.length_m = uniform(rng, 3.5, 5.5);
      t.width_m = uniform(rng, 1.6, 2.2);
      t.height_m = uniform(rng, 1.4, 2.0);
      t.color = {static_cast<std::uint8_t>(uniform_int(rng, 30, 230)),
                 static_cast<std::uint8_t>(uniform_int(rng, 30, 230)),
                 static_cast<std::uint8_t>(uniform_int(rng, 30, 230))};
      out.push_back(t);
    }
    return out;
  }();
  return kTypes;
}

void SceneConfig::validate() const {
  camera.validate();
  grid.validate();
  if (num_background_vehicles < 0) {
    throw std::invalid_argument("scene config: num_background_vehicles must be >= 0");
  }
  if (num_lanes <= 0) throw std::invalid_argument("scene config: num_lanes must be positive");
  if (vehicle_type_count <= 0 ||
      vehicle_type_count > static_cast<int>(vehicle_types().size())) {
    throw std::invalid_argument("scene config: vehicle_type_count must lie in [1, 26]");
  }
  // widest vehicle plus jitter and yaw sweep must stay inside its lane
  const double sweep = 0.5 * 5.5 * std::sin(yaw_jitter_deg * kDegToRad);
  if (!(lane_width_m > 2.0 * (1.1 + lateral_jitter_m + sweep))) {
    throw std::invalid_argument("scene config: lanes too narrow for non-overlapping placement");
  }
  if (!(road_length_m > 2.0 * grid.coverage_m())) {
    throw std::invalid_argument("scene config: road_length_m must exceed twice the grid coverage");
  }
  if (!(min_speed_mps >= 0.0 && max_speed_mps >= min_speed_mps)) {
    throw std::invalid_argument("scene config: bad speed range");
  }
  if (!(tick_s > 0.0)) throw std::invalid_argument("scene config: tick_s must be positive");
}

double Scene::lane_center_x(int lane) const {
  return (lane - 0.5 * (num_lanes - 1)) * lane_width_m;
}

Box3 Scene::to_ego_frame(const Vehicle& v) const {
  Box3 shifted = v.box;
  shifted.center.y() = ego.y_m + ring_offset(v.box.center.y(), ego.y_m, road_length_m);
  return world_to_ego(ego, shifted);
}

double Scene::distance_to_ego(const Vehicle& v) const {
  const double dx = v.box.center.x() - ego.x_m;
  const double dy = ring_offset(v.box.center.y(), ego.y_m, road_length_m);
  return std::hypot(dx, dy);
}

std::vector<Box3> Scene::others_in_ego_frame() const {
  std::vector<Box3> out;
  out.reserve(others.size());
  for (const auto& v : others) out.push_back(to_ego_frame(v));
  return out;
}

bool footprints_overlap(const Box3& a, const Box3& b, double ring_length) {
  Box3 bb = b;
  if (ring_length > 0.0) {
    bb.center.y() = a.center.y() + ring_offset(b.center.y(), a.center.y(), ring_length);
  }
  const auto ca = a.ground_corners();
  const auto cb = bb.ground_corners();
  const std::array<Eigen::Vector2d, 4> axes = {
      (ca[0] - ca[1]).normalized(), (ca[0] - ca[3]).normalized(),
      (cb[0] - cb[1]).normalized(), (cb[0] - cb[3]).normalized()};
  for (const auto& axis : axes) {
    if (separated_on_axis(ca, cb, axis)) return false;
  }
  return true;
}

Scene sample_scene(const SceneConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  Scene s;
  s.road_length_m = cfg.road_length_m;
  s.num_lanes = cfg.num_lanes;
  s.lane_width_m = cfg.lane_width_m;
  s.lane_speeds.resize(cfg.num_lanes);
  for (auto& v : s.lane_speeds) v = uniform(rng, cfg.min_speed_mps, cfg.max_speed_mps);

  const int ego_lane = uniform_int(rng, 0, cfg.num_lanes - 1);
  s.ego_vehicle = make_vehicle(cfg, rng, 0, ego_lane, uniform(rng, 0.0, cfg.road_length_m), s);
  s.ego_vehicle.box.yaw_rad = kHeadingAlongRoad;
  s.ego = {s.ego_vehicle.box.center.x(), s.ego_vehicle.box.center.y(), kHeadingAlongRoad};

  const int target = cfg.num_background_vehicles;
  const int max_rejections = 10 * target;
  int rejections = 0;
  s.others.reserve(target);
  while (static_cast<int>(s.others.size()) < target) {
    const int lane = uniform_int(rng, 0, cfg.num_lanes - 1);
    const double y = uniform(rng, 0.0, cfg.road_length_m);
    Vehicle v = make_vehicle(cfg, rng, static_cast<int>(s.others.size()) + 1, lane, y, s);
    if (clear_of(v, s, &s.ego_vehicle, s.others.size())) {
      s.others.push_back(v);
    } else if (++rejections >= max_rejections) {
      s.placement_saturated = true;
      break;
    }
  }
  return s;
}

void respawn_ego(Scene& scene, const SceneConfig& cfg, std::mt19937_64& rng) {
  constexpr int kMaxTries = 10000;
  for (int i = 0; i < kMaxTries; ++i) {
    const int lane = uniform_int(rng, 0, cfg.num_lanes - 1);
    const double y = uniform(rng, 0.0, cfg.road_length_m);
    Vehicle v = make_vehicle(cfg, rng, 0, lane, y, scene);
    v.box.yaw_rad = kHeadingAlongRoad;
    if (clear_of(v, scene, nullptr, scene.others.size())) {
      scene.ego_vehicle = v;
      scene.ego = {v.box.center.x(), v.box.center.y(), kHeadingAlongRoad};
      return;
    }
  }
  throw std::runtime_error("respawn_ego: no free spot on the road");
}

void advance(Scene& scene, double dt_s) {
  const double len = scene.road_length_m;
  for (auto& v : scene.others) {
    v.box.center.y() = wrap_positive(v.box.center.y() + v.speed_mps * dt_s, len);
  }
  auto& e = scene.ego_vehicle;
  e.box.center.y() = wrap_positive(e.box.center.y() + e.speed_mps * dt_s, len);
  scene.ego.x_m = e.box.center.x();
  scene.ego.y_m = e.box.center.y();
  scene.timestamp += dt_s;
}

std::vector<SceneRecord> annotate(const Scene& scene, const CameraModel& cam,
                                  const BevGrid& grid) {
  const auto& types = vehicle_types();
  std::vector<SceneRecord> out;
  for (const auto& v : scene.others) {
    const double dist = scene.distance_to_ego(v);
    if (dist > kAnnotationRadiusM) continue;
    const Box3 local = scene.to_ego_frame(v);
    const auto pv = project_box_pv(cam, local);
    if (!pv) continue;
    const auto bev = footprint_bev(grid, local);
    if (!bev) continue;
    SceneRecord r;
    r.id = v.id;
    r.name = types[v.type_id].name;
    r.distance_m = dist;
    r.timestamp = scene.timestamp;
    r.bbox_rgb = *pv;
    r.bbox_bev = *bev;
    r.ego_speed = scene.ego_vehicle.speed_mps;
    out.push_back(std::move(r));
  }
  return out;
}

void validate_record(const SceneRecord& rec, const CameraModel& cam, const BevGrid& grid) {
  if (!(rec.distance_m <= kAnnotationRadiusM)) {
    throw std::invalid_argument("record " + std::to_string(rec.id) + ": distance beyond radius");
  }
  const auto& p = rec.bbox_rgb;
  if (!(p.u_min <= p.u_max && p.v_min <= p.v_max && p.u_min >= 0.0 && p.v_min >= 0.0 &&
        p.u_max <= cam.width_px && p.v_max <= cam.height_px)) {
    throw std::invalid_argument("record " + std::to_string(rec.id) + ": PV box outside image");
  }
  const auto& b = rec.bbox_bev;
  const double lim = grid.size_px;
  if (!(b.u_min <= b.u_max && b.v_min <= b.v_max && b.u_min >= 0.0 && b.v_min >= 0.0 &&
        b.u_max <= lim && b.v_max <= lim)) {
    throw std::invalid_argument("record " + std::to_string(rec.id) + ": BEV box outside grid");
  }
}

void AcquisitionProtocol::validate() const {
  if (maps <= 0 || egos_per_map <= 0 || frames_per_ego <= 0 || weathers <= 0 || skip < 0) {
    throw std::invalid_argument("acquisition protocol: counts must be positive");
  }
}

std::size_t AcquisitionProtocol::frame_count() const {
  return static_cast<std::size_t>(maps) * egos_per_map * frames_per_ego * weathers;
}

std::mt19937_64 frame_rng(std::uint64_t seed, const FrameIndex& idx) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(idx.map), static_cast<std::uint32_t>(idx.ego),
                    static_cast<std::uint32_t>(idx.frame),
                    static_cast<std::uint32_t>(idx.weather)};
  return std::mt19937_64(seq);
}

namespace {

// Distinct tags keep map- and ego-level streams apart from frame streams.
constexpr std::uint32_t kMapStream = 0x6d6170u;
constexpr std::uint32_t kEgoStream = 0x65676fu;

std::mt19937_64 level_rng(std::uint64_t seed, std::uint32_t tag, int map, int ego) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    tag, static_cast<std::uint32_t>(map), static_cast<std::uint32_t>(ego)};
  return std::mt19937_64(seq);
}

double ticks_per_stored_frame(const AcquisitionProtocol& p) { return p.skip + 1.0; }

double episode_start_time(const SceneConfig& cfg, const AcquisitionProtocol& p, int ego) {
  return ego * static_cast<double>(p.weathers) * p.frames_per_ego *
         ticks_per_stored_frame(p) * cfg.tick_s;
}

Scene map_world(const SceneConfig& cfg, int map) {
  auto rng = level_rng(cfg.seed, kMapStream, map, 0);
  return sample_scene(cfg, rng);
}

Scene episode_start(const SceneConfig& cfg, const AcquisitionProtocol& p, const Scene& world,
                    int map, int ego) {
  Scene s = world;
  advance(s, episode_start_time(cfg, p, ego));
  auto rng = level_rng(cfg.seed, kEgoStream, map, ego);
  respawn_ego(s, cfg, rng);
  return s;
}

Scene frame_scene(const SceneConfig& cfg, const AcquisitionProtocol& p, const Scene& episode,
                  const FrameIndex& idx) {
  Scene s = episode;
  const double ticks =
      (static_cast<double>(idx.weather) * p.frames_per_ego + idx.frame) *
      ticks_per_stored_frame(p);
  advance(s, ticks * cfg.tick_s);
  auto rng = frame_rng(cfg.seed, idx);
  s.ego.yaw_rad =
      kHeadingAlongRoad + uniform(rng, -kEgoYawJitterDeg, kEgoYawJitterDeg) * kDegToRad;
  s.ego_vehicle.box.yaw_rad = s.ego.yaw_rad;
  s.weather = weather_presets()[idx.weather % weather_presets().size()];
  return s;
}

Frame capture(const SceneConfig& cfg, const Scene& scene, const FrameIndex& idx,
              std::size_t sequence, bool render) {
  Frame f;
  f.index = idx;
  f.sequence = sequence;
  f.timestamp = scene.timestamp;
  f.ego_speed = scene.ego_vehicle.speed_mps;
  f.weather = scene.weather.kind;
  f.placement_saturated = scene.placement_saturated;
  if (render) {
    auto rng = frame_rng(cfg.seed, idx);
    rng.discard(1);  // first draw went to the ego yaw jitter
    f.rgb = std::make_shared<const RgbImage>(render_pv(scene, cfg.camera, rng()));
    f.depth = std::make_shared<const DepthMap>(render_depth(scene, cfg.camera));
  } else {
    f.rgb = std::make_shared<const RgbImage>();
    f.depth = std::make_shared<const DepthMap>();
  }
  f.records = annotate(scene, cfg.camera, cfg.grid);
  for (auto& r : f.records) {
    r.rgb = f.rgb;
    r.depth = f.depth;
  }
  return f;
}

}  // namespace

Scene scene_at(const SceneConfig& cfg, const AcquisitionProtocol& protocol,
               const FrameIndex& index) {
  protocol.validate();
  const Scene world = map_world(cfg, index.map);
  const Scene episode = episode_start(cfg, protocol, world, index.map, index.ego);
  return frame_scene(cfg, protocol, episode, index);
}

void run_acquisition(const SceneConfig& cfg, const AcquisitionProtocol& protocol,
                     const FrameSink& sink, const AcquisitionOptions& options) {
  cfg.validate();
  protocol.validate();
  const unsigned workers = std::max(1u, options.workers);
  std::size_t sequence = 0;
  for (int m = 0; m < protocol.maps; ++m) {
    const Scene world = map_world(cfg, m);
    for (int e = 0; e < protocol.egos_per_map; ++e) {
      const Scene episode = episode_start(cfg, protocol, world, m, e);
      std::vector<FrameIndex> batch;
      batch.reserve(static_cast<std::size_t>(protocol.weathers) * protocol.frames_per_ego);
      for (int w = 0; w < protocol.weathers; ++w) {
        for (int f = 0; f < protocol.frames_per_ego; ++f) batch.push_back({m, e, f, w});
      }
      const auto make = [&](std::size_t i) {
        const Scene s = frame_scene(cfg, protocol, episode, batch[i]);
        return capture(cfg, s, batch[i], sequence + i, options.render);
      };
      if (workers == 1) {
        for (std::size_t i = 0; i < batch.size(); ++i) sink(make(i));
      } else {
        // frames are pure, so workers only change wall-clock time
        for (std::size_t start = 0; start < batch.size(); start += workers) {
          const std::size_t end = std::min(batch.size(), start + workers);
          std::vector<std::future<Frame>> pending;
          for (std::size_t i = start; i < end; ++i) {
            pending.push_back(std::async(std::launch::async, make, i));
          }
          for (auto& p : pending) sink(p.get());
        }
      }
      sequence += batch.size();
    }
  }
}

}  // namespace bevloc
