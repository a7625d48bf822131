#ifndef BEVLOC_COMMANDS_HPP_
#define BEVLOC_COMMANDS_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

#include "bevloc/bevnet.hpp"
#include "bevloc/dataset.hpp"
#include "bevloc/evalkit.hpp"
#include "bevloc/scenegen.hpp"

namespace bevloc {

/// Everything a command needs. Built from a preset, then a JSON config
/// file, then command-line overrides.
struct RunConfig {
  std::string preset = "desk";
  std::uint64_t seed = 0;
  SceneConfig scene;
  AcquisitionProtocol protocol;
  double train_fraction = 0.9;
  ArchConfig arch;
  TrainConfig train;
  unsigned workers = 1;
  bool force = false;

  std::filesystem::path out = "out";
  std::filesystem::path data;        // dataset root for train/eval/inspect
  std::filesystem::path checkpoint;  // model for eval

  std::string predictor = "model";  // model | oracle | constant
  std::string baseline;             // "" | ipm
  bool grid_meters = false;
  std::optional<std::size_t> record;      // inspect target
  std::filesystem::path predict_checkpoint;

  /// Seeds every stream from `seed`.
  void apply_seed(std::uint64_t s);
  void validate() const;
  nlohmann::json to_json() const;
  /// Overlays the keys present in `j` onto `base`.
  static RunConfig from_json(const nlohmann::json& j, RunConfig base);
};

/// Built-in presets: "desk" and "paper-protocol".
RunConfig preset_config(const std::string& name);

/// Preset (from `preset` or the file's "preset" key, default desk) with the
/// config file applied on top.
RunConfig load_run_config(const std::optional<std::string>& preset,
                          const std::optional<std::filesystem::path>& config_file);

nlohmann::json scene_config_to_json(const SceneConfig& c);
SceneConfig scene_config_from_json(const nlohmann::json& j, SceneConfig base = {});
nlohmann::json protocol_to_json(const AcquisitionProtocol& p);
AcquisitionProtocol protocol_from_json(const nlohmann::json& j, AcquisitionProtocol base = {});

/// Writes `resolved_config.json` into `dir`.
void echo_config(const RunConfig& cfg, const std::string& command,
                 const std::filesystem::path& dir);

struct GenResult {
  DatasetManifest manifest;
  double std_u_extent = 0.0;
  double std_v_extent = 0.0;
  std::size_t saturated_frames = 0;
};

/// Spread of BEV box extents over every record.
std::pair<double, double> extent_std(const Dataset& dataset);

GenResult cmd_gen(const RunConfig& cfg, std::ostream& log);

struct TrainResult {
  TrainHistory history;
  std::filesystem::path checkpoint;
};

/// Writes model.ckpt (best test mIoU), history.jsonl and resolved_config.json.
TrainResult cmd_train(const RunConfig& cfg, std::ostream& log);

struct EvalResult {
  Evaluation model;
  std::optional<Evaluation> baseline;
};

/// Writes summary.json and per_record.csv, plus ipm/ with `baseline = ipm`.
EvalResult cmd_eval(const RunConfig& cfg, std::ostream& log);

struct InspectResult {
  std::filesystem::path pv_image;
  std::filesystem::path bev_image;
};

/// PV frame with the record's box, and a BEV canvas with target, baseline
/// and optional predicted boxes.
InspectResult cmd_inspect(const RunConfig& cfg, std::ostream& log);

inline constexpr Rgb8 kPvBoxColor{255, 40, 40};
inline constexpr Rgb8 kTargetColor{40, 220, 40};
inline constexpr Rgb8 kBaselineColor{60, 120, 255};
inline constexpr Rgb8 kPredictionColor{255, 60, 60};

}  // namespace bevloc

#endif  // BEVLOC_COMMANDS_HPP_
