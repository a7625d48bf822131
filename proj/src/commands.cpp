#include "bevloc/commands.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace bevloc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <class V>
void take(const json& j, const char* key, V& v) {
  if (j.contains(key) && !j.at(key).is_null()) v = j.at(key).get<V>();
}

void take_path(const json& j, const char* key, fs::path& p) {
  if (j.contains(key) && j.at(key).is_string()) p = j.at(key).get<std::string>();
}

json camera_to_json(const CameraModel& c) {
  return {{"width_px", c.width_px},
          {"height_px", c.height_px},
          {"hfov_deg", c.hfov_deg},
          {"cam_height_m", c.cam_height_m},
          {"pitch_deg", c.pitch_deg}};
}

CameraModel camera_from_json(const json& j, CameraModel c) {
  take(j, "width_px", c.width_px);
  take(j, "height_px", c.height_px);
  take(j, "hfov_deg", c.hfov_deg);
  take(j, "cam_height_m", c.cam_height_m);
  take(j, "pitch_deg", c.pitch_deg);
  return c;
}

json generator_json(const RunConfig& cfg) {
  return {{"tool", "bevloc"},
          {"preset", cfg.preset},
          {"seed", cfg.seed},
          {"scene", scene_config_to_json(cfg.scene)},
          {"protocol", protocol_to_json(cfg.protocol)}};
}

CameraModel dataset_camera(const DatasetManifest& m, const CameraModel& fallback) {
  if (m.generator.contains("scene") && m.generator.at("scene").contains("camera")) {
    return camera_from_json(m.generator.at("scene").at("camera"), fallback);
  }
  return fallback;
}

Split dataset_split(const Dataset& ds) {
  const auto& m = ds.manifest();
  return split(m, m.train_fraction, m.split_seed);
}

NormStats dataset_norm(const Dataset& ds, const Split& sp) {
  if (ds.manifest().norm) return *ds.manifest().norm;
  return compute_norm_stats(ds, sp.train_frames);
}

std::vector<EvalItem> items_for(const Dataset& ds, std::span<const std::size_t> ids) {
  std::vector<EvalItem> items;
  items.reserve(ids.size());
  for (std::size_t id : ids) items.push_back({id, ds.record(id).bbox_bev});
  return items;
}

void write_reports(const fs::path& dir, const Evaluation& ev, const RunConfig& cfg,
                   double px_per_m) {
  fs::create_directories(dir);
  write_summary_json(dir / "summary.json", ev.summary,
                     cfg.grid_meters ? std::optional<double>(px_per_m) : std::nullopt);
  write_per_record_csv(dir / "per_record.csv", ev.rows);
}

void print_row(std::ostream& log, const std::string& name, const MetricsSummary& s,
               bool meters, double px_per_m) {
  log << std::left << std::setw(10) << name << std::right << std::setw(7) << s.n
      << std::setw(8) << s.skipped << std::fixed << std::setprecision(4) << std::setw(9)
      << s.mIoU << std::setw(10) << (meters ? pixels_to_meters(s.mCD, px_per_m) : s.mCD)
      << std::setw(9) << s.mhE << std::setw(9) << s.mwE << std::setw(9) << s.marE << '\n';
  log.unsetf(std::ios::floatfield);
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

json scene_config_to_json(const SceneConfig& c) {
  return {{"num_background_vehicles", c.num_background_vehicles},
          {"num_lanes", c.num_lanes},
          {"lane_width_m", c.lane_width_m},
          {"vehicle_type_count", c.vehicle_type_count},
          {"road_length_m", c.road_length_m},
          {"min_speed_mps", c.min_speed_mps},
          {"max_speed_mps", c.max_speed_mps},
          {"yaw_jitter_deg", c.yaw_jitter_deg},
          {"lateral_jitter_m", c.lateral_jitter_m},
          {"tick_s", c.tick_s},
          {"camera", camera_to_json(c.camera)},
          {"grid", {{"size_px", c.grid.size_px}, {"px_per_m", c.grid.px_per_m}}}};
}

SceneConfig scene_config_from_json(const json& j, SceneConfig c) {
  take(j, "num_background_vehicles", c.num_background_vehicles);
  take(j, "num_lanes", c.num_lanes);
  take(j, "lane_width_m", c.lane_width_m);
  take(j, "vehicle_type_count", c.vehicle_type_count);
  take(j, "road_length_m", c.road_length_m);
  take(j, "min_speed_mps", c.min_speed_mps);
  take(j, "max_speed_mps", c.max_speed_mps);
  take(j, "yaw_jitter_deg", c.yaw_jitter_deg);
  take(j, "lateral_jitter_m", c.lateral_jitter_m);
  take(j, "tick_s", c.tick_s);
  if (j.contains("camera")) c.camera = camera_from_json(j.at("camera"), c.camera);
  if (j.contains("grid")) {
    take(j.at("grid"), "size_px", c.grid.size_px);
    take(j.at("grid"), "px_per_m", c.grid.px_per_m);
  }
  return c;
}

json protocol_to_json(const AcquisitionProtocol& p) {
  return {{"maps", p.maps},
          {"egos_per_map", p.egos_per_map},
          {"frames_per_ego", p.frames_per_ego},
          {"weathers", p.weathers},
          {"skip", p.skip}};
}

AcquisitionProtocol protocol_from_json(const json& j, AcquisitionProtocol p) {
  take(j, "maps", p.maps);
  take(j, "egos_per_map", p.egos_per_map);
  take(j, "frames_per_ego", p.frames_per_ego);
  take(j, "weathers", p.weathers);
  take(j, "skip", p.skip);
  return p;
}

void RunConfig::apply_seed(std::uint64_t s) {
  seed = s;
  scene.seed = s;
  train.init_seed = s;
  train.shuffle_seed = s + 1;
}

void RunConfig::validate() const {
  scene.validate();
  protocol.validate();
  arch.validate();
  train.validate();
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("config: train_fraction must lie in (0, 1)");
  }
  if (workers < 1) throw std::invalid_argument("config: workers must be >= 1");
  if (predictor != "model" && predictor != "oracle" && predictor != "constant") {
    throw std::invalid_argument("config: predictor must be model, oracle or constant, got '" +
                                predictor + "'");
  }
  if (!baseline.empty() && baseline != "ipm") {
    throw std::invalid_argument("config: unknown baseline '" + baseline + "'");
  }
}

json RunConfig::to_json() const {
  return {{"preset", preset},
          {"seed", seed},
          {"scene", scene_config_to_json(scene)},
          {"protocol", protocol_to_json(protocol)},
          {"train_fraction", train_fraction},
          {"arch", arch.to_json()},
          {"train", train.to_json()},
          {"workers", workers},
          {"force", force},
          {"out", out.string()},
          {"data", data.string()},
          {"checkpoint", checkpoint.string()},
          {"predictor", predictor},
          {"baseline", baseline},
          {"grid_meters", grid_meters},
          {"record", record ? json(*record) : json(nullptr)},
          {"predict_checkpoint", predict_checkpoint.string()}};
}

RunConfig RunConfig::from_json(const json& j, RunConfig c) {
  if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
  take(j, "preset", c.preset);
  if (j.contains("seed")) c.apply_seed(j.at("seed").get<std::uint64_t>());
  if (j.contains("scene")) {
    const std::uint64_t s = c.scene.seed;
    c.scene = scene_config_from_json(j.at("scene"), c.scene);
    c.scene.seed = s;
  }
  if (j.contains("protocol")) c.protocol = protocol_from_json(j.at("protocol"), c.protocol);
  take(j, "train_fraction", c.train_fraction);
  if (j.contains("arch")) {
    json merged = c.arch.to_json();
    merged.update(j.at("arch"));
    c.arch = ArchConfig::from_json(merged);
  }
  if (j.contains("train")) {
    json merged = c.train.to_json();
    merged.update(j.at("train"));
    c.train = TrainConfig::from_json(merged);
  }
  take(j, "workers", c.workers);
  take(j, "force", c.force);
  take_path(j, "out", c.out);
  take_path(j, "data", c.data);
  take_path(j, "checkpoint", c.checkpoint);
  take(j, "predictor", c.predictor);
  take(j, "baseline", c.baseline);
  take(j, "grid_meters", c.grid_meters);
  if (j.contains("record") && !j.at("record").is_null()) {
    c.record = j.at("record").get<std::size_t>();
  }
  take_path(j, "predict_checkpoint", c.predict_checkpoint);
  return c;
}

RunConfig preset_config(const std::string& name) {
  RunConfig c;
  c.preset = name;
  if (name == "desk") {
    c.scene.camera = CameraModel{256, 192, 110.0, 1.6, 0.0};
    c.protocol = AcquisitionProtocol{2, 5, 10, 5, 5};
  } else if (name == "paper-protocol") {
    c.scene.camera = CameraModel{1024, 768, 110.0, 1.6, 0.0};
    c.protocol = AcquisitionProtocol{6, 20, 20, 5, 5};
  } else {
    throw std::invalid_argument("unknown preset '" + name +
                                "' (expected desk or paper-protocol)");
  }
  c.apply_seed(0);
  return c;
}

RunConfig load_run_config(const std::optional<std::string>& preset,
                          const std::optional<fs::path>& config_file) {
  json file = json::object();
  if (config_file) {
    std::ifstream in(*config_file);
    if (!in) throw std::runtime_error("cannot open config file " + config_file->string());
    try {
      file = json::parse(in);
    } catch (const json::parse_error& e) {
      throw std::runtime_error("config file " + config_file->string() + ": " + e.what());
    }
  }
  std::string name = "desk";
  if (file.contains("preset")) name = file.at("preset").get<std::string>();
  if (preset) name = *preset;
  RunConfig c = RunConfig::from_json(file, preset_config(name));
  c.preset = name;
  return c;
}

void echo_config(const RunConfig& cfg, const std::string& command, const fs::path& dir) {
  fs::create_directories(dir);
  json j = cfg.to_json();
  j["command"] = command;
  std::ofstream out(dir / "resolved_config.json");
  if (!out) throw std::runtime_error("cannot write " + (dir / "resolved_config.json").string());
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// gen

std::pair<double, double> extent_std(const Dataset& ds) {
  const std::size_t n = ds.record_count();
  if (n == 0) return {0.0, 0.0};
  double su = 0, sv = 0, su2 = 0, sv2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const BevBox& b = ds.record(i).bbox_bev;
    su += b.width();
    sv += b.height();
    su2 += b.width() * b.width();
    sv2 += b.height() * b.height();
  }
  const double k = static_cast<double>(n);
  const auto sd = [k](double s, double s2) {
    return std::sqrt(std::max(0.0, s2 / k - (s / k) * (s / k)));
  };
  return {sd(su, su2), sd(sv, sv2)};
}

GenResult cmd_gen(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  WriteOptions wo;
  wo.force = cfg.force;
  wo.train_fraction = cfg.train_fraction;
  wo.split_seed = cfg.seed;
  wo.generator = generator_json(cfg);
  wo.grid = cfg.scene.grid;

  const std::size_t total = cfg.protocol.frame_count();
  log << "generating " << total << " frames into " << cfg.out.string() << '\n';
  DatasetWriter writer(cfg.out, wo);
  GenResult res;
  std::size_t done = 0;
  run_acquisition(
      cfg.scene, cfg.protocol,
      [&](Frame&& f) {
        res.saturated_frames += f.placement_saturated ? 1 : 0;
        writer.add(f);
        ++done;
        if (total >= 10 && done % (total / 10) == 0) {
          log << "  " << done << "/" << total << " frames\n";
        }
      },
      AcquisitionOptions{cfg.workers, true});
  res.manifest = writer.finalize();
  echo_config(cfg, "gen", cfg.out);

  const Dataset ds = Dataset::open(cfg.out);
  std::tie(res.std_u_extent, res.std_v_extent) = extent_std(ds);
  log << "frames: " << res.manifest.frames.size() << '\n'
      << "records: " << res.manifest.record_count << '\n'
      << "unique vehicles: " << res.manifest.unique_vehicles << '\n'
      << "std BEV u-extent: " << res.std_u_extent << " px, v-extent: " << res.std_v_extent
      << " px (" << (res.std_v_extent > res.std_u_extent ? "vertical" : "horizontal")
      << " dominant)\n";
  if (res.saturated_frames > 0) {
    log << "warning: vehicle placement saturated in " << res.saturated_frames << " frames\n";
  }
  log << "checksum: " << res.manifest.checksum << '\n';
  return res;
}

// ---------------------------------------------------------------------------
// train

TrainResult cmd_train(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  if (cfg.data.empty()) throw std::invalid_argument("train: no dataset given (--data)");
  const Dataset ds = Dataset::open(cfg.data);
  const Split sp = dataset_split(ds);
  if (sp.train_records.empty()) throw std::runtime_error("train: the training split is empty");
  if (sp.warning) log << "warning: one side of the split is empty\n";
  const SampleBuilder samples(ds, dataset_norm(ds, sp), cfg.arch.image_downsample,
                              !cfg.arch.coords_only);

  BevNet<float> model = build_model<float>(cfg.arch, cfg.train.init_seed);
  fs::create_directories(cfg.out);
  echo_config(cfg, "train", cfg.out);
  log << "training " << (cfg.arch.coords_only ? "coords-only" : "full") << " model ("
      << model.parameter_count() << " parameters) on " << sp.train_records.size()
      << " records, testing on " << sp.test_records.size() << '\n';

  std::ofstream hist_out(cfg.out / "history.jsonl");
  if (!hist_out) throw std::runtime_error("cannot write history.jsonl");
  const auto on_epoch = [&](const EpochStats& st) {
    const json line = {{"epoch", st.epoch},   {"loss", st.loss},     {"mIoU", st.test.mIoU},
                       {"mCD", st.test.mCD},  {"mhE", st.test.mhE},  {"mwE", st.test.mwE},
                       {"marE", st.test.marE}};
    hist_out << line.dump() << '\n';
    hist_out.flush();
    log << "epoch " << st.epoch << "  loss " << st.loss << "  mIoU " << st.test.mIoU
        << "  mCD " << st.test.mCD << "  (" << std::fixed << std::setprecision(1)
        << st.seconds << " s)\n";
    log.unsetf(std::ios::floatfield);
    log << std::setprecision(6);
  };

  TrainResult res;
  res.history = train(model, samples, ds, sp.train_records, sp.test_records, cfg.train, on_epoch);
  res.checkpoint = cfg.out / "model.ckpt";
  save_checkpoint(res.checkpoint, model, cfg.train.init_seed, res.history.steps,
                  {{"best_epoch", res.history.best_epoch},
                   {"normalize_targets", cfg.train.normalize_targets},
                   {"dataset_checksum", ds.manifest().checksum}});
  log << "best epoch " << res.history.best_epoch << ", checkpoint " << res.checkpoint.string()
      << '\n';
  return res;
}

// ---------------------------------------------------------------------------
// eval

EvalResult cmd_eval(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  if (cfg.data.empty()) throw std::invalid_argument("eval: no dataset given (--data)");
  const Dataset ds = Dataset::open(cfg.data);
  const DatasetManifest& m = ds.manifest();
  const Split sp = dataset_split(ds);
  const std::vector<EvalItem> items = items_for(ds, sp.test_records);
  const double ppm = m.grid.px_per_m;

  std::vector<std::optional<BevBox>> preds;
  if (cfg.predictor == "model") {
    if (cfg.checkpoint.empty()) throw std::runtime_error("eval: no checkpoint given (--checkpoint)");
    if (!fs::exists(cfg.checkpoint)) {
      throw std::runtime_error("eval: checkpoint not found: " + cfg.checkpoint.string());
    }
    const Checkpoint ckpt = read_checkpoint(cfg.checkpoint);
    BevNet<float> model = load_model(ckpt);
    const SampleBuilder samples(ds, dataset_norm(ds, sp), ckpt.arch.image_downsample,
                                !ckpt.arch.coords_only);
    const bool normalized = ckpt.extra.value("normalize_targets", true);
    for (const BevBox& b : predict_records(model, samples, m.grid, sp.test_records, normalized)) {
      preds.emplace_back(b);
    }
  } else if (cfg.predictor == "oracle") {
    for (const auto& it : items) preds.emplace_back(it.target);
  } else {
    const BevBox mean = mean_target_box(ds, sp.train_records);
    preds.assign(items.size(), mean);
  }

  EvalResult res;
  res.model = evaluate_predictions(items, preds, ppm);
  fs::create_directories(cfg.out);
  write_reports(cfg.out, res.model, cfg, ppm);

  if (cfg.baseline == "ipm") {
    const CameraModel cam = dataset_camera(m, cfg.scene.camera);
    std::vector<std::optional<BevBox>> base;
    base.reserve(items.size());
    for (std::size_t id : sp.test_records) {
      base.push_back(ipm_predict(cam, m.grid, ds.record(id).bbox_rgb));
    }
    res.baseline = evaluate_predictions(items, base, ppm);
    write_reports(cfg.out / "ipm", *res.baseline, cfg, ppm);
  }
  echo_config(cfg, "eval", cfg.out);

  log << "test records: " << items.size() << '\n';
  log << std::left << std::setw(10) << "predictor" << std::right << std::setw(7) << "n"
      << std::setw(8) << "skipped" << std::setw(9) << "mIoU" << std::setw(10)
      << (cfg.grid_meters ? "mCD[m]" : "mCD[px]") << std::setw(9) << "mhE" << std::setw(9)
      << "mwE" << std::setw(9) << "marE" << '\n';
  print_row(log, cfg.predictor, res.model.summary, cfg.grid_meters, ppm);
  if (res.baseline) print_row(log, "ipm", res.baseline->summary, cfg.grid_meters, ppm);
  return res;
}

// ---------------------------------------------------------------------------
// inspect

InspectResult cmd_inspect(const RunConfig& cfg, std::ostream& log) {
  if (cfg.data.empty()) throw std::invalid_argument("inspect: no dataset given (--data)");
  if (!cfg.record) throw std::invalid_argument("inspect: no record id given (--record)");
  const Dataset ds = Dataset::open(cfg.data);
  const std::size_t id = *cfg.record;
  if (id >= ds.record_count()) {
    throw std::out_of_range("inspect: unknown record id " + std::to_string(id) + " (dataset has " +
                            std::to_string(ds.record_count()) + " records)");
  }
  const RecordMeta& rec = ds.record(id);
  const DatasetManifest& m = ds.manifest();

  RgbImage pv = ds.load_rgb(rec.frame);
  draw_rect(pv, rec.bbox_rgb.u_min, rec.bbox_rgb.v_min, rec.bbox_rgb.u_max, rec.bbox_rgb.v_max,
            kPvBoxColor);

  RgbImage bev(m.grid.size_px, m.grid.size_px, Rgb8{25, 25, 25});
  const PixelPoint ego = m.grid.anchor();
  for (int dy = -2; dy <= 0; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      const int x = static_cast<int>(ego.u) + dx;
      const int y = static_cast<int>(ego.v) + dy;
      if (x >= 0 && y >= 0 && x < bev.width() && y < bev.height()) bev.set(x, y, {220, 220, 220});
    }
  }
  const CameraModel cam = dataset_camera(m, cfg.scene.camera);
  if (const auto base = ipm_predict(cam, m.grid, rec.bbox_rgb)) {
    draw_rect(bev, base->u_min, base->v_min, base->u_max, base->v_max, kBaselineColor);
  }
  if (!cfg.predict_checkpoint.empty()) {
    const Checkpoint ckpt = read_checkpoint(cfg.predict_checkpoint);
    BevNet<float> model = load_model(ckpt);
    const Split sp = dataset_split(ds);
    const SampleBuilder samples(ds, dataset_norm(ds, sp), ckpt.arch.image_downsample,
                                !ckpt.arch.coords_only);
    const Sample s = samples.sample(id);
    const BevBox p = predict(model, s.image, s.pv_box_norm, m.grid,
                             ckpt.extra.value("normalize_targets", true));
    draw_rect(bev, p.u_min, p.v_min, p.u_max, p.v_max, kPredictionColor);
    log << "prediction: [" << p.u_min << ", " << p.v_min << ", " << p.u_max << ", " << p.v_max
        << "]\n";
  }
  draw_rect(bev, rec.bbox_bev.u_min, rec.bbox_bev.v_min, rec.bbox_bev.u_max, rec.bbox_bev.v_max,
            kTargetColor);

  fs::create_directories(cfg.out);
  InspectResult res;
  res.pv_image = cfg.out / ("record_" + std::to_string(id) + "_pv.ppm");
  res.bev_image = cfg.out / ("record_" + std::to_string(id) + "_bev.ppm");
  write_ppm(res.pv_image, pv);
  write_ppm(res.bev_image, bev);
  log << "record " << id << " (" << rec.name << ", frame " << m.frames[rec.frame].frame_id
      << ", " << rec.distance << " m)\n"
      << "  pv:  " << res.pv_image.string() << '\n'
      << "  bev: " << res.bev_image.string() << '\n';
  return res;
}

}  // namespace bevloc
