#ifndef BEVLOC_DATASET_HPP_
#define BEVLOC_DATASET_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bevloc/geometry.hpp"
#include "bevloc/image.hpp"
#include "bevloc/nn.hpp"
#include "bevloc/scenegen.hpp"

namespace bevloc {

// On-disk layout under a dataset root:
//   manifest.json                  sorted keys, UTF-8
//   frames/<frame_id>/rgb.ppm      binary P6
//   frames/<frame_id>/depth.f32    little-endian float32, row-major
//   frames/<frame_id>/records.json one record object per line
// A file named INCOMPLETE marks a dataset whose write did not finish.

inline constexpr int kFormatVersion = 1;
inline constexpr double kStdFloor = 1e-6;

/// Per-channel statistics of pixel values scaled to [0, 1].
struct NormStats {
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<double, 3> std{1.0, 1.0, 1.0};
};

struct FrameEntry {
  std::string frame_id;
  FrameIndex index;
  std::size_t sequence = 0;
  double timestamp = 0.0;
  double ego_speed = 0.0;
  std::string weather;
  std::size_t first_record = 0;
  std::size_t record_count = 0;
};

/// Where record i lives: its frame and the byte range of its object inside
/// that frame's records.json.
struct RecordEntry {
  std::size_t frame = 0;
  std::size_t offset = 0;
  std::size_t length = 0;
  int vehicle_id = 0;
};

struct DatasetManifest {
  int format_version = kFormatVersion;
  nlohmann::json generator = nlohmann::json::object();
  std::size_t record_count = 0;
  int image_width = 0;
  int image_height = 0;
  BevGrid grid;
  std::optional<NormStats> norm;
  std::uint64_t split_seed = 0;
  double train_fraction = 0.9;
  std::size_t unique_vehicles = 0;  // distinct (map, vehicle id) pairs
  std::vector<FrameEntry> frames;
  std::vector<RecordEntry> records;
  std::string checksum;  // SHA-256 over blobs and the manifest body

  nlohmann::json to_json() const;
  static DatasetManifest from_json(const nlohmann::json& j);
};

struct WriteOptions {
  bool force = false;
  double train_fraction = 0.9;
  std::uint64_t split_seed = 0;
  nlohmann::json generator = nlohmann::json::object();
  BevGrid grid;
};

/// Single serialization point for a dataset. Frames must arrive in
/// sequence order. Refuses to touch an existing dataset unless `force`.
class DatasetWriter {
 public:
  DatasetWriter(std::filesystem::path root, WriteOptions options);
  DatasetWriter(const DatasetWriter&) = delete;
  DatasetWriter& operator=(const DatasetWriter&) = delete;

  void add(const Frame& frame);
  /// Splits, computes training-split statistics, writes the manifest and
  /// clears the INCOMPLETE marker.
  DatasetManifest finalize();

 private:
  struct ChannelSums {
    std::array<std::uint64_t, 3> sum{};
    std::array<std::uint64_t, 3> sum_sq{};
    std::uint64_t pixels = 0;
  };

  std::filesystem::path root_;
  WriteOptions options_;
  DatasetManifest manifest_;
  std::vector<ChannelSums> sums_;
  std::vector<std::pair<int, int>> seen_vehicles_;
  bool finalized_ = false;
};

DatasetManifest write_dataset(std::span<const Frame> frames, const std::filesystem::path& root,
                              const WriteOptions& options);

struct RecordMeta {
  int id = 0;
  std::string name;
  double distance = 0.0;
  double timestamp = 0.0;
  double speed = 0.0;
  PvBox bbox_rgb;
  BevBox bbox_bev;
  std::size_t frame = 0;
};

nlohmann::json record_to_json(const SceneRecord& r);
RecordMeta record_from_json(const nlohmann::json& j);

class Dataset {
 public:
  /// Throws if the manifest is missing or the INCOMPLETE marker is present.
  static Dataset open(const std::filesystem::path& root);

  const DatasetManifest& manifest() const { return manifest_; }
  const std::filesystem::path& root() const { return root_; }
  std::size_t record_count() const { return records_.size(); }
  std::size_t frame_count() const { return manifest_.frames.size(); }
  const RecordMeta& record(std::size_t i) const { return records_.at(i); }
  std::vector<std::size_t> frame_of_records() const;

  std::filesystem::path frame_dir(std::size_t frame) const;
  RgbImage load_rgb(std::size_t frame) const;
  DepthMap load_depth(std::size_t frame) const;
  /// Reads record i by its byte range and attaches the frame images.
  SceneRecord read_record(std::size_t i) const;

 private:
  std::filesystem::path root_;
  DatasetManifest manifest_;
  std::vector<RecordMeta> records_;
};

struct Split {
  std::vector<std::size_t> train_frames;
  std::vector<std::size_t> test_frames;
  std::vector<std::size_t> train_records;
  std::vector<std::size_t> test_records;
  bool warning = false;  // one side came out empty
};

/// Deterministic shuffle of frames by `seed`; every record follows its frame.
Split split(const DatasetManifest& manifest, double train_fraction, std::uint64_t seed);

/// Mean/std over every pixel of the given frames, std floored at kStdFloor.
NormStats compute_norm_stats(const Dataset& dataset, std::span<const std::size_t> frames);

enum class BoxSampling { OnePerFrame, AllBoxes };

/// Epoch-by-epoch batch order. With OnePerFrame each frame contributes one
/// of its records, drawn uniformly per epoch.
class BatchPlan {
 public:
  BatchPlan(std::vector<std::size_t> record_ids, std::span<const std::size_t> frame_of_record,
            std::size_t batch_size, std::uint64_t seed, BoxSampling sampling);

  std::vector<std::vector<std::size_t>> epoch(std::size_t epoch_index) const;
  std::size_t samples_per_epoch() const;

 private:
  std::vector<std::vector<std::size_t>> groups_;  // record ids grouped by frame
  std::size_t batch_size_;
  std::uint64_t seed_;
  BoxSampling sampling_;
};

struct Sample {
  nn::Tensor<float> image;  // (3, H, W), normalized
  std::array<float, 4> pv_box_norm{};
  BevBox target_bev;
};

struct Batch {
  std::vector<std::size_t> ids;
  nn::Tensor<float> images;   // (N, 3, H, W); empty when images are disabled
  nn::Tensor<float> boxes;    // (N, 4) PV corners over image dims
  nn::Tensor<float> targets;  // (N, 4) BEV corners over grid size
};

/// Builds normalized network inputs. Preprocessed frames are cached.
class SampleBuilder {
 public:
  SampleBuilder(const Dataset& dataset, NormStats stats, int downsample, bool with_images);

  Sample sample(std::size_t record) const;
  Batch batch(std::span<const std::size_t> ids) const;

  std::array<float, 4> normalize_box(const PvBox& b) const;
  /// Box-filter downsampling then per-channel normalization.
  nn::Tensor<float> preprocess(const RgbImage& img) const;
  int input_width() const;
  int input_height() const;
  bool with_images() const { return with_images_; }
  const NormStats& stats() const { return stats_; }

 private:
  const nn::Tensor<float>& frame_tensor(std::size_t frame) const;

  const Dataset* dataset_;
  NormStats stats_;
  int downsample_;
  bool with_images_;
  mutable std::vector<std::optional<nn::Tensor<float>>> cache_;
};

}  // namespace bevloc

#endif  // BEVLOC_DATASET_HPP_
