#ifndef BEVLOC_BEVNET_HPP_
#define BEVLOC_BEVNET_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bevloc/dataset.hpp"
#include "bevloc/evalkit.hpp"
#include "bevloc/geometry.hpp"
#include "bevloc/nn.hpp"

namespace bevloc {

/// Layer widths of the two-branch regressor.
struct ArchConfig {
  bool coords_only = false;                     // drop the image branch
  std::vector<std::size_t> backbone_channels{8, 16, 32};
  std::size_t image_feature_width = 128;
  std::vector<std::size_t> box_widths{64, 128};
  std::size_t fusion_width = 256;
  std::vector<std::size_t> head_h{128, 64};
  std::vector<std::size_t> head_v{256, 128, 64};
  bool asymmetric_heads = true;  // require one more hidden layer in head V
  int image_downsample = 4;

  void validate() const;
  nlohmann::json to_json() const;
  static ArchConfig from_json(const nlohmann::json& j);
  bool operator==(const ArchConfig&) const = default;
};

template <typename T>
struct BevInput {
  nn::Tensor<T> images;  // (N, 3, H, W); unused when coords_only
  nn::Tensor<T> boxes;   // (N, 4)
};

/// Image features and box features are concatenated, fused by one dense
/// layer, then split into a horizontal head producing (u_min, u_max) and a
/// vertical head producing (v_min, v_max). Output rows are
/// (u_min, v_min, u_max, v_max).
template <typename T>
class BevNet {
 public:
  explicit BevNet(ArchConfig arch);

  const ArchConfig& arch() const { return arch_; }
  nn::Tensor<T> forward(const BevInput<T>& in);
  /// Takes d loss / d output with the (N, 4) row layout of forward().
  void backward(const nn::Tensor<T>& grad_out);
  std::vector<nn::Parameter<T>*> parameters();
  std::size_t parameter_count() const;
  void zero_grad();
  void initialize(std::uint64_t seed, bool zero_output = false);

  std::size_t head_h_hidden_layers() const { return head_h_.relu_count(); }
  std::size_t head_v_hidden_layers() const { return head_v_.relu_count(); }
  T max_abs_activation() const;
  T min_relu_margin() const;

  /// Layer specs per branch, in parameter order.
  nlohmann::json layer_specs() const;

 private:
  ArchConfig arch_;
  nn::Sequential<T> backbone_, box_encoder_, fusion_, head_h_, head_v_;
  nn::Concat<T> concat_;
};

extern template class BevNet<float>;
extern template class BevNet<double>;

template <typename T>
BevNet<T> build_model(const ArchConfig& arch, std::uint64_t seed, bool zero_output = false) {
  BevNet<T> net(arch);
  net.initialize(seed, zero_output);
  return net;
}

/// Parameter count implied by the widths alone.
std::size_t expected_parameter_count(const ArchConfig& arch);

struct TrainConfig {
  int epochs = 100;
  std::size_t batch = 32;
  nn::AdamConfig adam{};
  std::uint64_t init_seed = 0;
  std::uint64_t shuffle_seed = 1;
  BoxSampling sampling = BoxSampling::OnePerFrame;
  bool normalize_targets = true;  // regress grid-normalized corners

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochStats {
  int epoch = 0;  // 1-based
  double loss = 0.0;
  MetricsSummary test;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  int best_epoch = 0;  // 0 means the initial weights were never beaten
  double best_miou = -1.0;
  std::vector<float> best_parameters;
  std::int64_t steps = 0;
};

/// Raised when the loss stops being finite.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Adam on the joint MSE over the four corners. Evaluates the test records
/// after every epoch and keeps the parameters with the best test mIoU.
/// `model` is left holding those parameters.
TrainHistory train(BevNet<float>& model, const SampleBuilder& samples,
                   const Dataset& dataset, std::span<const std::size_t> train_records,
                   std::span<const std::size_t> test_records, const TrainConfig& cfg,
                   const EpochCallback& on_epoch = {});

/// Raw network output converted to grid pixels, corners sorted and clipped.
BevBox to_grid_box(std::span<const float> row, const BevGrid& grid, bool normalized = true);

/// Batched prediction for dataset records.
std::vector<BevBox> predict_records(BevNet<float>& model, const SampleBuilder& samples,
                                    const BevGrid& grid, std::span<const std::size_t> records,
                                    bool normalized = true, std::size_t batch = 256);

/// Single prediction from a preprocessed image and a raw PV box.
BevBox predict(BevNet<float>& model, const nn::Tensor<float>& image,
               const std::array<float, 4>& pv_box_norm, const BevGrid& grid,
               bool normalized = true);

/// Metrics on `records` against their stored BEV targets.
Evaluation evaluate_model(BevNet<float>& model, const SampleBuilder& samples,
                          const Dataset& dataset, std::span<const std::size_t> records,
                          bool normalized = true);

inline constexpr double kDefaultLengthPriorM = 4.5;

/// Ground-contact baseline: the bottom corners of the PV box go through the
/// inverse perspective map to form the near edge, which is extended away
/// from the ego by the length prior. Absent when the bottom edge does not
/// reach the ground inside the grid.
std::optional<BevBox> ipm_predict(const CameraModel& cam, const BevGrid& grid,
                                  const PvBox& pv_box,
                                  double length_prior_m = kDefaultLengthPriorM);

/// Mean training target, used as a reference predictor.
BevBox mean_target_box(const Dataset& dataset, std::span<const std::size_t> records);

struct Checkpoint {
  ArchConfig arch;
  std::uint64_t seed = 0;
  std::int64_t step = 0;
  nlohmann::json extra = nlohmann::json::object();
  std::vector<float> parameters;
};

/// uint64 little-endian header length, JSON header, float32 little-endian
/// parameters in layer order.
void save_checkpoint(const std::filesystem::path& path, BevNet<float>& model,
                     std::uint64_t seed, std::int64_t step,
                     const nlohmann::json& extra = nlohmann::json::object());
Checkpoint read_checkpoint(const std::filesystem::path& path);
BevNet<float> load_model(const Checkpoint& ckpt);

}  // namespace bevloc

#endif  // BEVLOC_BEVNET_HPP_
