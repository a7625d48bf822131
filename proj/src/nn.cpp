#include "bevloc/nn.hpp"

#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Core>

namespace bevloc::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using VecMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

template <typename T>
void uniform_fill(Tensor<T>& t, double limit, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& v : t.values()) v = static_cast<T>(dist(rng));
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor

template <typename T>
Tensor<T>::Tensor(std::vector<std::size_t> shape, T fill)
    : shape_(std::move(shape)), data_(product(shape_), fill) {}

template <typename T>
void Tensor<T>::reshape(std::vector<std::size_t> shape) {
  if (product(shape) != data_.size()) {
    throw std::invalid_argument("reshape: " + shape_string(shape_) + " -> " +
                                shape_string(shape) + " changes element count");
  }
  shape_ = std::move(shape);
}

template <typename T>
bool Tensor<T>::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
T Tensor<T>::max_abs() const {
  T m = T{0};
  for (T v : data_) m = std::max(m, std::abs(v));
  return m;
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ')';
  return os.str();
}

// ---------------------------------------------------------------------------
// LayerSpec

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Dense: return "Dense";
    case LayerKind::ReLU: return "ReLU";
    case LayerKind::Conv: return "Conv";
    case LayerKind::GlobalAvgPool: return "GlobalAvgPool";
    case LayerKind::Flatten: return "Flatten";
    case LayerKind::Concat: return "Concat";
  }
  return "?";
}

LayerKind layer_kind_from_string(std::string_view name) {
  for (auto k : {LayerKind::Dense, LayerKind::ReLU, LayerKind::Conv, LayerKind::GlobalAvgPool,
                 LayerKind::Flatten, LayerKind::Concat}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown layer kind '" + std::string(name) + "'");
}

std::string LayerSpec::describe() const {
  std::ostringstream os;
  os << to_string(kind);
  switch (kind) {
    case LayerKind::Dense: os << '(' << in << "->" << out << ')'; break;
    case LayerKind::Conv:
      os << '(' << in << "->" << out << ", k=" << kernel << ", s=" << stride << ')';
      break;
    case LayerKind::Concat: os << '(' << in << '+' << out << ')'; break;
    default: break;
  }
  return os.str();
}

std::size_t LayerSpec::parameter_count() const {
  switch (kind) {
    case LayerKind::Dense: return in * out + out;
    case LayerKind::Conv: return out * in * kernel * kernel + out;
    default: return 0;
  }
}

// ---------------------------------------------------------------------------
// Dense

template <typename T>
Dense<T>::Dense(std::size_t in, std::size_t out)
    : in_(in), out_(out),
      weight_{"weight", Tensor<T>({out, in}), Tensor<T>({out, in})},
      bias_{"bias", Tensor<T>({out}), Tensor<T>({out})} {
  require(in > 0 && out > 0, "Dense: widths must be positive");
}

template <typename T>
Tensor<T> Dense<T>::forward(const Tensor<T>& x) {
  require(x.rank() == 2 && x.dim(1) == in_,
          "expected input (N, " + std::to_string(in_) + "), got " + shape_string(x.shape()));
  const std::size_t n = x.dim(0);
  input_ = x;
  has_input_ = true;
  Tensor<T> y({n, out_});
  ConstMatMap<T> X(x.data(), n, in_);
  ConstMatMap<T> W(weight_.value.data(), out_, in_);
  MatMap<T> Y(y.data(), n, out_);
  Y.noalias() = X * W.transpose();
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias_.value.data(), out_);
  Y.rowwise() += b;
  return y;
}

template <typename T>
Tensor<T> Dense<T>::backward(const Tensor<T>& g) {
  if (!has_input_) throw std::logic_error("Dense: backward called before forward");
  const std::size_t n = input_.dim(0);
  require(g.rank() == 2 && g.dim(0) == n && g.dim(1) == out_,
          "Dense: upstream gradient shape " + shape_string(g.shape()));
  ConstMatMap<T> G(g.data(), n, out_);
  ConstMatMap<T> X(input_.data(), n, in_);
  ConstMatMap<T> W(weight_.value.data(), out_, in_);
  MatMap<T> dW(weight_.grad.data(), out_, in_);
  dW.noalias() += G.transpose() * X;
  Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> db(bias_.grad.data(), out_);
  db += G.colwise().sum();
  Tensor<T> dx({n, in_});
  MatMap<T> DX(dx.data(), n, in_);
  DX.noalias() = G * W;
  return dx;
}

// ---------------------------------------------------------------------------
// ReLU

template <typename T>
Tensor<T> ReLU<T>::forward(const Tensor<T>& x) {
  input_ = x;
  has_input_ = true;
  Tensor<T> y = x;
  T margin = std::numeric_limits<T>::infinity();
  for (auto& v : y.values()) {
    margin = std::min(margin, std::abs(v));
    if (v < T{0}) v = T{0};
  }
  min_margin_ = margin;
  return y;
}

template <typename T>
Tensor<T> ReLU<T>::backward(const Tensor<T>& g) {
  if (!has_input_) throw std::logic_error("ReLU: backward called before forward");
  require(g.size() == input_.size(), "ReLU: upstream gradient shape " + shape_string(g.shape()));
  Tensor<T> dx = g;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    if (!(input_[i] > T{0})) dx[i] = T{0};
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Conv2d

template <typename T>
Conv2d<T>::Conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t stride)
    : in_ch_(in_ch), out_ch_(out_ch), stride_(stride),
      weight_{"weight", Tensor<T>({out_ch, in_ch, 3, 3}), Tensor<T>({out_ch, in_ch, 3, 3})},
      bias_{"bias", Tensor<T>({out_ch}), Tensor<T>({out_ch})} {
  require(in_ch > 0 && out_ch > 0 && stride > 0, "Conv: channels and stride must be positive");
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x) {
  require(x.rank() == 4 && x.dim(1) == in_ch_,
          "expected input (N, " + std::to_string(in_ch_) + ", H, W), got " +
              shape_string(x.shape()));
  const std::size_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const std::size_t oh = output_extent(h, stride_), ow = output_extent(w, stride_);
  require(oh > 0 && ow > 0, "Conv: spatial input " + shape_string(x.shape()) + " smaller than 3x3");
  const std::size_t krows = in_ch_ * 9;
  const std::size_t ocols = oh * ow;
  in_shape_ = x.shape();
  has_input_ = true;
  cols_.assign(n * krows * ocols, T{0});
  Tensor<T> y({n, out_ch_, oh, ow});
  ConstMatMap<T> W(weight_.value.data(), out_ch_, krows);
  for (std::size_t s = 0; s < n; ++s) {
    T* col = cols_.data() + s * krows * ocols;
    const T* img = x.data() + s * in_ch_ * h * w;
    for (std::size_t c = 0; c < in_ch_; ++c) {
      for (std::size_t ky = 0; ky < 3; ++ky) {
        for (std::size_t kx = 0; kx < 3; ++kx) {
          T* row = col + ((c * 3 + ky) * 3 + kx) * ocols;
          for (std::size_t oy = 0; oy < oh; ++oy) {
            const T* src = img + (c * h + oy * stride_ + ky) * w + kx;
            for (std::size_t ox = 0; ox < ow; ++ox) row[oy * ow + ox] = src[ox * stride_];
          }
        }
      }
    }
    ConstMatMap<T> C(col, krows, ocols);
    MatMap<T> Y(y.data() + s * out_ch_ * ocols, out_ch_, ocols);
    Y.noalias() = W * C;
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(bias_.value.data(), out_ch_);
    Y.colwise() += b;
  }
  return y;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& g) {
  if (!has_input_) throw std::logic_error("Conv: backward called before forward");
  const std::size_t n = in_shape_[0], h = in_shape_[2], w = in_shape_[3];
  const std::size_t oh = output_extent(h, stride_), ow = output_extent(w, stride_);
  const std::size_t krows = in_ch_ * 9;
  const std::size_t ocols = oh * ow;
  require(g.rank() == 4 && g.dim(0) == n && g.dim(1) == out_ch_ && g.dim(2) == oh &&
              g.dim(3) == ow,
          "Conv: upstream gradient shape " + shape_string(g.shape()));
  ConstMatMap<T> W(weight_.value.data(), out_ch_, krows);
  MatMap<T> dW(weight_.grad.data(), out_ch_, krows);
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> db(bias_.grad.data(), out_ch_);
  Tensor<T> dx(in_shape_);
  RowMat<T> dcol(krows, ocols);
  for (std::size_t s = 0; s < n; ++s) {
    ConstMatMap<T> G(g.data() + s * out_ch_ * ocols, out_ch_, ocols);
    ConstMatMap<T> C(cols_.data() + s * krows * ocols, krows, ocols);
    dW.noalias() += G * C.transpose();
    db += G.rowwise().sum();
    dcol.noalias() = W.transpose() * G;
    T* img = dx.data() + s * in_ch_ * h * w;
    for (std::size_t c = 0; c < in_ch_; ++c) {
      for (std::size_t ky = 0; ky < 3; ++ky) {
        for (std::size_t kx = 0; kx < 3; ++kx) {
          const T* row = dcol.data() + ((c * 3 + ky) * 3 + kx) * ocols;
          for (std::size_t oy = 0; oy < oh; ++oy) {
            T* dst = img + (c * h + oy * stride_ + ky) * w + kx;
            for (std::size_t ox = 0; ox < ow; ++ox) dst[ox * stride_] += row[oy * ow + ox];
          }
        }
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// GlobalAvgPool / Flatten

template <typename T>
Tensor<T> GlobalAvgPool<T>::forward(const Tensor<T>& x) {
  require(x.rank() == 4, "expected input (N, C, H, W), got " + shape_string(x.shape()));
  in_shape_ = x.shape();
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  require(hw > 0, "GlobalAvgPool: empty spatial extent");
  Tensor<T> y({n, c});
  for (std::size_t i = 0; i < n * c; ++i) {
    const T* p = x.data() + i * hw;
    T sum = T{0};
    for (std::size_t k = 0; k < hw; ++k) sum += p[k];
    y[i] = sum / static_cast<T>(hw);
  }
  return y;
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::backward(const Tensor<T>& g) {
  if (in_shape_.empty()) throw std::logic_error("GlobalAvgPool: backward called before forward");
  const std::size_t n = in_shape_[0], c = in_shape_[1], hw = in_shape_[2] * in_shape_[3];
  require(g.size() == n * c, "GlobalAvgPool: upstream gradient shape " + shape_string(g.shape()));
  Tensor<T> dx(in_shape_);
  for (std::size_t i = 0; i < n * c; ++i) {
    const T v = g[i] / static_cast<T>(hw);
    std::fill_n(dx.data() + i * hw, hw, v);
  }
  return dx;
}

template <typename T>
Tensor<T> Flatten<T>::forward(const Tensor<T>& x) {
  require(x.rank() >= 1, "Flatten: scalar input");
  in_shape_ = x.shape();
  Tensor<T> y = x;
  y.reshape({x.dim(0), x.size() / std::max<std::size_t>(1, x.dim(0))});
  return y;
}

template <typename T>
Tensor<T> Flatten<T>::backward(const Tensor<T>& g) {
  if (in_shape_.empty()) throw std::logic_error("Flatten: backward called before forward");
  Tensor<T> dx = g;
  dx.reshape(in_shape_);
  return dx;
}

// ---------------------------------------------------------------------------
// Concat

template <typename T>
Tensor<T> Concat<T>::forward(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.rank() == 2 && b.rank() == 2 && a.dim(0) == b.dim(0),
          "Concat: incompatible inputs " + shape_string(a.shape()) + " and " +
              shape_string(b.shape()));
  left_ = a.dim(1);
  right_ = b.dim(1);
  has_input_ = true;
  const std::size_t n = a.dim(0);
  Tensor<T> y({n, left_ + right_});
  for (std::size_t s = 0; s < n; ++s) {
    std::copy_n(a.data() + s * left_, left_, y.data() + s * (left_ + right_));
    std::copy_n(b.data() + s * right_, right_, y.data() + s * (left_ + right_) + left_);
  }
  return y;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> Concat<T>::backward(const Tensor<T>& g) const {
  if (!has_input_) throw std::logic_error("Concat: backward called before forward");
  require(g.rank() == 2 && g.dim(1) == left_ + right_,
          "Concat: upstream gradient shape " + shape_string(g.shape()));
  const std::size_t n = g.dim(0);
  Tensor<T> ga({n, left_}), gb({n, right_});
  for (std::size_t s = 0; s < n; ++s) {
    std::copy_n(g.data() + s * (left_ + right_), left_, ga.data() + s * left_);
    std::copy_n(g.data() + s * (left_ + right_) + left_, right_, gb.data() + s * right_);
  }
  return {std::move(ga), std::move(gb)};
}

template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec) {
  switch (spec.kind) {
    case LayerKind::Dense: return std::make_unique<Dense<T>>(spec.in, spec.out);
    case LayerKind::ReLU: return std::make_unique<ReLU<T>>();
    case LayerKind::Conv:
      require(spec.kernel == 3, "Conv: only 3x3 kernels are supported");
      return std::make_unique<Conv2d<T>>(spec.in, spec.out, spec.stride);
    case LayerKind::GlobalAvgPool: return std::make_unique<GlobalAvgPool<T>>();
    case LayerKind::Flatten: return std::make_unique<Flatten<T>>();
    case LayerKind::Concat: break;
  }
  throw std::invalid_argument("make_layer: Concat joins two branches and is not a chain layer");
}

// ---------------------------------------------------------------------------
// Sequential

template <typename T>
Sequential<T>::Sequential(const Sequential& other)
    : has_forward_(false), max_abs_activation_(other.max_abs_activation_) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

template <typename T>
Sequential<T>& Sequential<T>::operator=(const Sequential& other) {
  if (this != &other) {
    Sequential tmp(other);
    *this = std::move(tmp);
  }
  return *this;
}

template <typename T>
Sequential<T>& Sequential<T>::add(std::unique_ptr<Layer<T>> layer) {
  const std::string prefix =
      std::to_string(layers_.size()) + "." + std::string(to_string(layer->spec().kind));
  for (auto* p : layer->parameters()) {
    const auto dot = p->name.rfind('.');
    p->name = prefix + "." + (dot == std::string::npos ? p->name : p->name.substr(dot + 1));
  }
  layers_.push_back(std::move(layer));
  return *this;
}

template <typename T>
Sequential<T>& Sequential<T>::dense(std::size_t in, std::size_t out) {
  return add(std::make_unique<Dense<T>>(in, out));
}
template <typename T>
Sequential<T>& Sequential<T>::relu() {
  return add(std::make_unique<ReLU<T>>());
}
template <typename T>
Sequential<T>& Sequential<T>::conv(std::size_t in_ch, std::size_t out_ch, std::size_t stride) {
  return add(std::make_unique<Conv2d<T>>(in_ch, out_ch, stride));
}
template <typename T>
Sequential<T>& Sequential<T>::global_avg_pool() {
  return add(std::make_unique<GlobalAvgPool<T>>());
}
template <typename T>
Sequential<T>& Sequential<T>::flatten() {
  return add(std::make_unique<Flatten<T>>());
}

template <typename T>
std::vector<LayerSpec> Sequential<T>::specs() const {
  std::vector<LayerSpec> out;
  for (const auto& l : layers_) out.push_back(l->spec());
  return out;
}

template <typename T>
Tensor<T> Sequential<T>::forward(const Tensor<T>& x) {
  Tensor<T> cur = x;
  T peak = T{0};
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    try {
      cur = layers_[i]->forward(cur);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("layer " + std::to_string(i) + " (" +
                                  layers_[i]->spec().describe() + "): " + e.what());
    }
    peak = std::max(peak, cur.max_abs());
  }
  max_abs_activation_ = peak;
  has_forward_ = true;
  return cur;
}

template <typename T>
Tensor<T> Sequential<T>::backward(const Tensor<T>& grad_out) {
  if (!has_forward_) throw std::logic_error("Sequential: backward called before forward");
  Tensor<T> g = grad_out;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    try {
      g = layers_[i]->backward(g);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("layer " + std::to_string(i) + " (" +
                                  layers_[i]->spec().describe() + "): " + e.what());
    }
  }
  return g;
}

template <typename T>
std::vector<Parameter<T>*> Sequential<T>::parameters() {
  std::vector<Parameter<T>*> out;
  for (auto& l : layers_) {
    for (auto* p : l->parameters()) out.push_back(p);
  }
  return out;
}

template <typename T>
std::size_t Sequential<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l->spec().parameter_count();
  return n;
}

template <typename T>
void Sequential<T>::zero_grad() {
  for (auto* p : parameters()) p->grad.fill(T{0});
}

template <typename T>
void Sequential<T>::initialize(std::mt19937_64& rng, bool zero_output) {
  std::size_t last_param = layers_.size();
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (!layers_[i]->parameters().empty()) last_param = i;
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    auto params = layers_[i]->parameters();
    if (params.empty()) continue;
    const LayerSpec s = layers_[i]->spec();
    const std::size_t taps = s.kind == LayerKind::Conv ? 9 : 1;
    const double fan_in = static_cast<double>(s.in * taps);
    const double fan_out = static_cast<double>(s.out * taps);
    const bool feeds_relu =
        i + 1 < layers_.size() && layers_[i + 1]->spec().kind == LayerKind::ReLU;
    Tensor<T>& w = params[0]->value;
    if (zero_output && i == last_param) {
      w.fill(T{0});
    } else if (feeds_relu) {
      uniform_fill(w, std::sqrt(6.0 / fan_in), rng);
    } else {
      uniform_fill(w, std::sqrt(6.0 / (fan_in + fan_out)), rng);
    }
    params[1]->value.fill(T{0});
  }
  zero_grad();
}

template <typename T>
T Sequential<T>::min_relu_margin() const {
  T m = std::numeric_limits<T>::infinity();
  for (const auto& l : layers_) {
    if (const auto* r = dynamic_cast<const ReLU<T>*>(l.get())) m = std::min(m, r->min_margin());
  }
  return m;
}

template <typename T>
std::size_t Sequential<T>::relu_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l->spec().kind == LayerKind::ReLU ? 1 : 0;
  return n;
}

// ---------------------------------------------------------------------------
// Loss / optimizer

template <typename T>
MseResult<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  require(pred.shape() == target.shape(), "mse_loss: shape mismatch " +
                                              shape_string(pred.shape()) + " vs " +
                                              shape_string(target.shape()));
  require(pred.size() > 0, "mse_loss: empty tensors");
  MseResult<T> r;
  r.grad = Tensor<T>(pred.shape());
  const T n = static_cast<T>(pred.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const T d = pred[i] - target[i];
    sum += static_cast<double>(d) * static_cast<double>(d);
    r.grad[i] = T{2} * d / n;
  }
  r.value = static_cast<T>(sum / static_cast<double>(pred.size()));
  return r;
}

template <typename T>
void Adam<T>::step(const std::vector<Parameter<T>*>& params) {
  if (m_.empty()) {
    for (auto* p : params) {
      m_.emplace_back(p->value.size(), 0.0);
      v_.emplace_back(p->value.size(), 0.0);
    }
  }
  if (m_.size() != params.size()) {
    throw std::invalid_argument("Adam: parameter list changed between steps");
  }
  ++t_;
  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    if (p.value.size() != m_[k].size() || p.grad.size() != p.value.size()) {
      throw std::invalid_argument("Adam: shape mismatch for " + p.name);
    }
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = static_cast<double>(p.grad[i]);
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p.value[i] = static_cast<T>(p.value[i] - cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
    }
  }
}

template <typename T>
std::vector<T> flatten_values(const std::vector<Parameter<T>*>& params) {
  std::vector<T> out;
  for (const auto* p : params) out.insert(out.end(), p->value.values().begin(), p->value.values().end());
  return out;
}

template <typename T>
void assign_values(const std::vector<Parameter<T>*>& params, std::span<const T> flat) {
  std::size_t total = 0;
  for (const auto* p : params) total += p->value.size();
  if (total != flat.size()) {
    throw std::invalid_argument("assign_values: expected " + std::to_string(total) +
                                " values, got " + std::to_string(flat.size()));
  }
  std::size_t off = 0;
  for (auto* p : params) {
    std::copy_n(flat.begin() + off, p->value.size(), p->value.values().begin());
    off += p->value.size();
  }
}

#define BEVLOC_NN_INSTANTIATE(T)                                                      \
  template class Tensor<T>;                                                           \
  template class Dense<T>;                                                            \
  template class ReLU<T>;                                                             \
  template class Conv2d<T>;                                                           \
  template class GlobalAvgPool<T>;                                                    \
  template class Flatten<T>;                                                          \
  template class Concat<T>;                                                           \
  template class Sequential<T>;                                                       \
  template class Adam<T>;                                                             \
  template std::unique_ptr<Layer<T>> make_layer<T>(const LayerSpec&);                 \
  template MseResult<T> mse_loss<T>(const Tensor<T>&, const Tensor<T>&);              \
  template std::vector<T> flatten_values<T>(const std::vector<Parameter<T>*>&);       \
  template void assign_values<T>(const std::vector<Parameter<T>*>&, std::span<const T>);

BEVLOC_NN_INSTANTIATE(float)
BEVLOC_NN_INSTANTIATE(double)

#undef BEVLOC_NN_INSTANTIATE

}  // namespace bevloc::nn
