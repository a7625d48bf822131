#ifndef BEVLOC_NN_HPP_
#define BEVLOC_NN_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace bevloc::nn {

/// Dense row-major array. Rank-2 tensors are (batch, features); rank-4
/// tensors are (batch, channels, height, width).
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, T fill = T{0});

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  /// Same element count required.
  void reshape(std::vector<std::size_t> shape);
  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  bool all_finite() const;
  T max_abs() const;

  bool operator==(const Tensor&) const = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<T> data_;
};

std::string shape_string(const std::vector<std::size_t>& shape);

enum class LayerKind { Dense, ReLU, Conv, GlobalAvgPool, Flatten, Concat };

std::string_view to_string(LayerKind kind);
LayerKind layer_kind_from_string(std::string_view name);

/// Structural description of a layer. `in`/`out` are feature widths for
/// Dense, channel counts for Conv and the two input widths for Concat.
struct LayerSpec {
  LayerKind kind = LayerKind::ReLU;
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t kernel = 0;
  std::size_t stride = 0;

  std::string describe() const;
  std::size_t parameter_count() const;
  bool operator==(const LayerSpec&) const = default;
};

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
};

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual LayerSpec spec() const = 0;
  /// Caches whatever backward() needs.
  virtual Tensor<T> forward(const Tensor<T>& x) = 0;
  /// Accumulates parameter gradients and returns the input gradient.
  virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;
  virtual std::vector<Parameter<T>*> parameters() { return {}; }
  virtual std::unique_ptr<Layer<T>> clone() const = 0;
};

template <typename T>
class Dense final : public Layer<T> {
 public:
  Dense(std::size_t in, std::size_t out);
  LayerSpec spec() const override { return {LayerKind::Dense, in_, out_, 0, 0}; }
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::vector<Parameter<T>*> parameters() override { return {&weight_, &bias_}; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Dense>(*this); }

  Parameter<T>& weight() { return weight_; }  // (out, in)
  Parameter<T>& bias() { return bias_; }      // (out)

 private:
  std::size_t in_, out_;
  Parameter<T> weight_, bias_;
  Tensor<T> input_;
  bool has_input_ = false;
};

template <typename T>
class ReLU final : public Layer<T> {
 public:
  LayerSpec spec() const override { return {LayerKind::ReLU, 0, 0, 0, 0}; }
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<ReLU>(*this); }
  /// Smallest |pre-activation| seen by the last forward pass.
  T min_margin() const { return min_margin_; }

 private:
  Tensor<T> input_;
  bool has_input_ = false;
  T min_margin_ = T{0};
};

/// 3x3 convolution without padding.
template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t stride = 2);
  LayerSpec spec() const override { return {LayerKind::Conv, in_ch_, out_ch_, 3, stride_}; }
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::vector<Parameter<T>*> parameters() override { return {&weight_, &bias_}; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Conv2d>(*this); }

  static std::size_t output_extent(std::size_t in, std::size_t stride) {
    return in < 3 ? 0 : (in - 3) / stride + 1;
  }

 private:
  std::size_t in_ch_, out_ch_, stride_;
  Parameter<T> weight_, bias_;  // (out, in, 3, 3), (out)
  std::vector<std::size_t> in_shape_;
  std::vector<T> cols_;  // im2col buffers for the whole batch
  bool has_input_ = false;
};

template <typename T>
class GlobalAvgPool final : public Layer<T> {
 public:
  LayerSpec spec() const override { return {LayerKind::GlobalAvgPool, 0, 0, 0, 0}; }
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::unique_ptr<Layer<T>> clone() const override {
    return std::make_unique<GlobalAvgPool>(*this);
  }

 private:
  std::vector<std::size_t> in_shape_;
};

template <typename T>
class Flatten final : public Layer<T> {
 public:
  LayerSpec spec() const override { return {LayerKind::Flatten, 0, 0, 0, 0}; }
  Tensor<T> forward(const Tensor<T>& x) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Flatten>(*this); }

 private:
  std::vector<std::size_t> in_shape_;
};

/// Joins (N, a) and (N, b) feature tensors into (N, a + b).
template <typename T>
class Concat {
 public:
  LayerSpec spec() const { return {LayerKind::Concat, left_, right_, 0, 0}; }
  Tensor<T> forward(const Tensor<T>& left, const Tensor<T>& right);
  std::pair<Tensor<T>, Tensor<T>> backward(const Tensor<T>& grad_out) const;

 private:
  std::size_t left_ = 0;
  std::size_t right_ = 0;
  bool has_input_ = false;
};

template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec);

/// Chain of layers.
template <typename T>
class Sequential {
 public:
  Sequential() = default;
  Sequential(const Sequential& other);
  Sequential& operator=(const Sequential& other);
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  Sequential& add(std::unique_ptr<Layer<T>> layer);
  Sequential& dense(std::size_t in, std::size_t out);
  Sequential& relu();
  Sequential& conv(std::size_t in_ch, std::size_t out_ch, std::size_t stride = 2);
  Sequential& global_avg_pool();
  Sequential& flatten();

  std::size_t size() const { return layers_.size(); }
  bool empty() const { return layers_.empty(); }
  Layer<T>& layer(std::size_t i) { return *layers_.at(i); }
  std::vector<LayerSpec> specs() const;

  /// Shape errors are rethrown as std::invalid_argument naming the layer.
  Tensor<T> forward(const Tensor<T>& x);
  /// std::logic_error when called before forward().
  Tensor<T> backward(const Tensor<T>& grad_out);

  std::vector<Parameter<T>*> parameters();
  std::size_t parameter_count() const;
  void zero_grad();

  /// He-uniform for layers that feed a ReLU, Xavier-uniform otherwise,
  /// zero biases. `zero_output` zeroes the last parameterized layer.
  void initialize(std::mt19937_64& rng, bool zero_output = false);

  T min_relu_margin() const;
  T max_abs_activation() const { return max_abs_activation_; }
  /// Hidden ReLU layers, i.e. the depth of a dense head.
  std::size_t relu_count() const;

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
  bool has_forward_ = false;
  T max_abs_activation_ = T{0};
};

template <typename T>
struct MseResult {
  T value = T{0};
  Tensor<T> grad;  // d loss / d pred
};

/// Mean over all elements of the squared difference.
template <typename T>
MseResult<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target);

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam. Moments are created lazily on the first step and
/// keyed by parameter position, so the parameter list must not change.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}
  void step(const std::vector<Parameter<T>*>& params);
  std::int64_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::int64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

/// Flattens parameter values in list order.
template <typename T>
std::vector<T> flatten_values(const std::vector<Parameter<T>*>& params);
template <typename T>
void assign_values(const std::vector<Parameter<T>*>& params, std::span<const T> flat);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // "<param name>[index]"
};

/// Central differences on every parameter against the analytic gradient of
/// the MSE loss. Relative error is |a - n| / max(|a|, |n|, 1e-8).
/// `Model` provides forward(input), backward(grad), parameters() and
/// zero_grad() over Tensor<double>.
template <class Model, class Input>
GradCheckReport grad_check(Model& model, const Input& input, const Tensor<double>& target,
                           double eps = 1e-5) {
  model.zero_grad();
  const auto out = model.forward(input);
  const auto loss = mse_loss(out, target);
  model.backward(loss.grad);
  GradCheckReport report;
  for (Parameter<double>* p : model.parameters()) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + eps;
      const double up = mse_loss(model.forward(input), target).value;
      p->value[i] = saved - eps;
      const double down = mse_loss(model.forward(input), target).value;
      p->value[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = p->grad[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      const double rel = std::abs(analytic - numeric) / denom;
      ++report.checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst = p->name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return report;
}

}  // namespace bevloc::nn

#endif  // BEVLOC_NN_HPP_
