#include "bevloc/bevnet.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstring>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace bevloc {

using nlohmann::json;

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

json spec_json(const nn::LayerSpec& s) {
  return {{"kind", std::string(nn::to_string(s.kind))},
          {"in", s.in},
          {"out", s.out},
          {"kernel", s.kernel},
          {"stride", s.stride}};
}

template <typename T>
json branch_json(const nn::Sequential<T>& seq) {
  json arr = json::array();
  for (const auto& s : seq.specs()) arr.push_back(spec_json(s));
  return arr;
}

template <typename T>
void append(std::vector<nn::Parameter<T>*>& out, nn::Sequential<T>& seq) {
  for (auto* p : seq.parameters()) out.push_back(p);
}

const char* sampling_name(BoxSampling s) {
  return s == BoxSampling::OnePerFrame ? "one-per-frame" : "all-boxes";
}

BoxSampling sampling_from(const std::string& s) {
  if (s == "one-per-frame") return BoxSampling::OnePerFrame;
  if (s == "all-boxes") return BoxSampling::AllBoxes;
  throw std::invalid_argument("unknown sampling mode '" + s + "'");
}

}  // namespace

// ---------------------------------------------------------------------------
// Architecture

void ArchConfig::validate() const {
  require(!box_widths.empty(), "arch: box encoder needs at least one layer");
  const auto positive = [](const std::vector<std::size_t>& v) {
    return std::all_of(v.begin(), v.end(), [](std::size_t w) { return w > 0; });
  };
  require(positive(box_widths) && positive(head_h) && positive(head_v),
          "arch: layer widths must be positive");
  require(fusion_width > 0, "arch: fusion width must be positive");
  if (!coords_only) {
    require(!backbone_channels.empty() && positive(backbone_channels),
            "arch: backbone needs positive channel counts");
    require(image_feature_width > 0, "arch: image feature width must be positive");
  }
  require(image_downsample >= 1, "arch: image_downsample must be >= 1");
  if (asymmetric_heads) {
    require(head_v.size() > head_h.size(),
            "arch: vertical head must have more hidden layers than the horizontal head");
  }
}

json ArchConfig::to_json() const {
  return {{"coords_only", coords_only},
          {"backbone_channels", backbone_channels},
          {"image_feature_width", image_feature_width},
          {"box_widths", box_widths},
          {"fusion_width", fusion_width},
          {"head_h", head_h},
          {"head_v", head_v},
          {"asymmetric_heads", asymmetric_heads},
          {"image_downsample", image_downsample}};
}

ArchConfig ArchConfig::from_json(const json& j) {
  ArchConfig a;
  a.coords_only = j.value("coords_only", a.coords_only);
  a.backbone_channels = j.value("backbone_channels", a.backbone_channels);
  a.image_feature_width = j.value("image_feature_width", a.image_feature_width);
  a.box_widths = j.value("box_widths", a.box_widths);
  a.fusion_width = j.value("fusion_width", a.fusion_width);
  a.head_h = j.value("head_h", a.head_h);
  a.head_v = j.value("head_v", a.head_v);
  a.asymmetric_heads = j.value("asymmetric_heads", a.asymmetric_heads);
  a.image_downsample = j.value("image_downsample", a.image_downsample);
  a.validate();
  return a;
}

std::size_t expected_parameter_count(const ArchConfig& a) {
  std::size_t n = 0;
  const auto dense = [&](std::size_t in, std::size_t out) { n += in * out + out; };
  std::size_t fused_in = a.box_widths.back();
  if (!a.coords_only) {
    std::size_t ch = 3;
    for (std::size_t c : a.backbone_channels) {
      n += c * ch * 9 + c;
      ch = c;
    }
    dense(ch, a.image_feature_width);
    fused_in += a.image_feature_width;
  }
  std::size_t w = 4;
  for (std::size_t b : a.box_widths) {
    dense(w, b);
    w = b;
  }
  dense(fused_in, a.fusion_width);
  for (const auto* head : {&a.head_h, &a.head_v}) {
    std::size_t in = a.fusion_width;
    for (std::size_t h : *head) {
      dense(in, h);
      in = h;
    }
    dense(in, 2);
  }
  return n;
}

template <typename T>
BevNet<T>::BevNet(ArchConfig arch) : arch_(std::move(arch)) {
  arch_.validate();
  std::size_t fused_in = arch_.box_widths.back();
  if (!arch_.coords_only) {
    std::size_t ch = 3;
    for (std::size_t c : arch_.backbone_channels) {
      backbone_.conv(ch, c).relu();
      ch = c;
    }
    backbone_.global_avg_pool().dense(ch, arch_.image_feature_width).relu();
    fused_in += arch_.image_feature_width;
  }
  std::size_t w = 4;
  for (std::size_t b : arch_.box_widths) {
    box_encoder_.dense(w, b).relu();
    w = b;
  }
  fusion_.dense(fused_in, arch_.fusion_width).relu();
  for (auto [seq, widths] : {std::pair{&head_h_, &arch_.head_h}, std::pair{&head_v_, &arch_.head_v}}) {
    std::size_t in = arch_.fusion_width;
    for (std::size_t h : *widths) {
      seq->dense(in, h).relu();
      in = h;
    }
    seq->dense(in, 2);
  }
}

template <typename T>
nn::Tensor<T> BevNet<T>::forward(const BevInput<T>& in) {
  require(in.boxes.rank() == 2 && in.boxes.dim(1) == 4, "bevnet: boxes must be (N, 4), got " +
                                                            nn::shape_string(in.boxes.shape()));
  const std::size_t n = in.boxes.dim(0);
  nn::Tensor<T> f_box = box_encoder_.forward(in.boxes);
  nn::Tensor<T> fused;
  if (arch_.coords_only) {
    fused = fusion_.forward(f_box);
  } else {
    require(in.images.rank() == 4 && in.images.dim(0) == n,
            "bevnet: images must be (N, 3, H, W) matching the boxes, got " +
                nn::shape_string(in.images.shape()));
    const nn::Tensor<T> f_img = backbone_.forward(in.images);
    fused = fusion_.forward(concat_.forward(f_img, f_box));
  }
  const nn::Tensor<T> h = head_h_.forward(fused);
  const nn::Tensor<T> v = head_v_.forward(fused);
  nn::Tensor<T> out({n, 4});
  for (std::size_t i = 0; i < n; ++i) {
    out[i * 4 + 0] = h[i * 2 + 0];
    out[i * 4 + 1] = v[i * 2 + 0];
    out[i * 4 + 2] = h[i * 2 + 1];
    out[i * 4 + 3] = v[i * 2 + 1];
  }
  return out;
}

template <typename T>
void BevNet<T>::backward(const nn::Tensor<T>& g) {
  require(g.rank() == 2 && g.dim(1) == 4, "bevnet: gradient must be (N, 4)");
  const std::size_t n = g.dim(0);
  nn::Tensor<T> gh({n, 2}), gv({n, 2});
  for (std::size_t i = 0; i < n; ++i) {
    gh[i * 2 + 0] = g[i * 4 + 0];
    gv[i * 2 + 0] = g[i * 4 + 1];
    gh[i * 2 + 1] = g[i * 4 + 2];
    gv[i * 2 + 1] = g[i * 4 + 3];
  }
  nn::Tensor<T> g_fused = head_h_.backward(gh);
  const nn::Tensor<T> g_v = head_v_.backward(gv);
  for (std::size_t i = 0; i < g_fused.size(); ++i) g_fused[i] += g_v[i];
  const nn::Tensor<T> g_in = fusion_.backward(g_fused);
  if (arch_.coords_only) {
    box_encoder_.backward(g_in);
  } else {
    auto [g_img, g_box] = concat_.backward(g_in);
    backbone_.backward(g_img);
    box_encoder_.backward(g_box);
  }
}

template <typename T>
std::vector<nn::Parameter<T>*> BevNet<T>::parameters() {
  std::vector<nn::Parameter<T>*> out;
  append(out, backbone_);
  append(out, box_encoder_);
  append(out, fusion_);
  append(out, head_h_);
  append(out, head_v_);
  return out;
}

template <typename T>
std::size_t BevNet<T>::parameter_count() const {
  return backbone_.parameter_count() + box_encoder_.parameter_count() +
         fusion_.parameter_count() + head_h_.parameter_count() + head_v_.parameter_count();
}

template <typename T>
void BevNet<T>::zero_grad() {
  backbone_.zero_grad();
  box_encoder_.zero_grad();
  fusion_.zero_grad();
  head_h_.zero_grad();
  head_v_.zero_grad();
}

template <typename T>
void BevNet<T>::initialize(std::uint64_t seed, bool zero_output) {
  std::mt19937_64 rng(seed);
  backbone_.initialize(rng);
  box_encoder_.initialize(rng);
  fusion_.initialize(rng);
  head_h_.initialize(rng, zero_output);
  head_v_.initialize(rng, zero_output);
}

template <typename T>
T BevNet<T>::max_abs_activation() const {
  return std::max({backbone_.max_abs_activation(), box_encoder_.max_abs_activation(),
                   fusion_.max_abs_activation(), head_h_.max_abs_activation(),
                   head_v_.max_abs_activation()});
}

template <typename T>
T BevNet<T>::min_relu_margin() const {
  T m = std::min({box_encoder_.min_relu_margin(), fusion_.min_relu_margin(),
                  head_h_.min_relu_margin(), head_v_.min_relu_margin()});
  if (!arch_.coords_only) m = std::min(m, backbone_.min_relu_margin());
  return m;
}

template <typename T>
json BevNet<T>::layer_specs() const {
  return {{"backbone", branch_json(backbone_)},
          {"box_encoder", branch_json(box_encoder_)},
          {"fusion", branch_json(fusion_)},
          {"head_h", branch_json(head_h_)},
          {"head_v", branch_json(head_v_)}};
}

template class BevNet<float>;
template class BevNet<double>;

// ---------------------------------------------------------------------------
// Training

void TrainConfig::validate() const {
  require(epochs >= 0, "train: epochs must be >= 0");
  require(batch >= 1, "train: batch must be >= 1");
  require(adam.lr >= 0.0 && std::isfinite(adam.lr), "train: lr must be finite and >= 0");
  require(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0,
          "train: Adam betas must lie in [0, 1)");
  require(adam.eps > 0.0, "train: Adam eps must be positive");
}

json TrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"batch", batch},
          {"lr", adam.lr},
          {"beta1", adam.beta1},
          {"beta2", adam.beta2},
          {"eps", adam.eps},
          {"init_seed", init_seed},
          {"shuffle_seed", shuffle_seed},
          {"sampling", sampling_name(sampling)},
          {"normalize_targets", normalize_targets}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch = j.value("batch", c.batch);
  c.adam.lr = j.value("lr", c.adam.lr);
  c.adam.beta1 = j.value("beta1", c.adam.beta1);
  c.adam.beta2 = j.value("beta2", c.adam.beta2);
  c.adam.eps = j.value("eps", c.adam.eps);
  c.init_seed = j.value("init_seed", c.init_seed);
  c.shuffle_seed = j.value("shuffle_seed", c.shuffle_seed);
  c.sampling = sampling_from(j.value("sampling", std::string(sampling_name(c.sampling))));
  c.normalize_targets = j.value("normalize_targets", c.normalize_targets);
  c.validate();
  return c;
}

BevBox to_grid_box(std::span<const float> row, const BevGrid& grid, bool normalized) {
  const double scale = normalized ? grid.size_px : 1.0;
  const double size = grid.size_px;
  const auto clip = [&](double x) { return std::isfinite(x) ? std::clamp(x, 0.0, size) : 0.0; };
  double u0 = clip(row[0] * scale), v0 = clip(row[1] * scale);
  double u1 = clip(row[2] * scale), v1 = clip(row[3] * scale);
  if (u0 > u1) std::swap(u0, u1);
  if (v0 > v1) std::swap(v0, v1);
  return BevBox{u0, v0, u1, v1};
}

std::vector<BevBox> predict_records(BevNet<float>& model, const SampleBuilder& samples,
                                    const BevGrid& grid, std::span<const std::size_t> records,
                                    bool normalized, std::size_t batch) {
  std::vector<BevBox> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); i += batch) {
    const auto chunk = records.subspan(i, std::min(batch, records.size() - i));
    Batch b = samples.batch(chunk);
    const nn::Tensor<float> y = model.forward({std::move(b.images), std::move(b.boxes)});
    for (std::size_t r = 0; r < chunk.size(); ++r) {
      out.push_back(to_grid_box(y.values().subspan(r * 4, 4), grid, normalized));
    }
  }
  return out;
}

BevBox predict(BevNet<float>& model, const nn::Tensor<float>& image,
               const std::array<float, 4>& pv_box_norm, const BevGrid& grid, bool normalized) {
  BevInput<float> in;
  if (!model.arch().coords_only) {
    require(image.rank() == 3, "predict: image must be (3, H, W)");
    in.images = image;
    in.images.reshape({1, image.dim(0), image.dim(1), image.dim(2)});
  }
  in.boxes = nn::Tensor<float>({1, 4});
  std::copy(pv_box_norm.begin(), pv_box_norm.end(), in.boxes.data());
  const nn::Tensor<float> y = model.forward(in);
  return to_grid_box(y.values(), grid, normalized);
}

Evaluation evaluate_model(BevNet<float>& model, const SampleBuilder& samples,
                          const Dataset& dataset, std::span<const std::size_t> records,
                          bool normalized) {
  const BevGrid& grid = dataset.manifest().grid;
  const std::vector<BevBox> preds = predict_records(model, samples, grid, records, normalized);
  std::vector<EvalItem> items;
  std::vector<std::optional<BevBox>> opt;
  items.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    items.push_back({records[i], dataset.record(records[i]).bbox_bev});
    opt.emplace_back(preds[i]);
  }
  return evaluate_predictions(items, opt, grid.px_per_m);
}

TrainHistory train(BevNet<float>& model, const SampleBuilder& samples, const Dataset& dataset,
                   std::span<const std::size_t> train_records,
                   std::span<const std::size_t> test_records, const TrainConfig& cfg,
                   const EpochCallback& on_epoch) {
  cfg.validate();
  require(!train_records.empty(), "train: the training split is empty");
  require(samples.with_images() || model.arch().coords_only,
          "train: the image branch needs a sample builder with images");
  const BevGrid& grid = dataset.manifest().grid;
  const float target_scale = cfg.normalize_targets ? 1.0f : static_cast<float>(grid.size_px);

  const std::vector<std::size_t> frame_of = dataset.frame_of_records();
  const BatchPlan plan({train_records.begin(), train_records.end()}, frame_of, cfg.batch,
                       cfg.shuffle_seed, cfg.sampling);
  nn::Adam<float> adam(cfg.adam);
  const auto params = model.parameters();

  TrainHistory hist;
  hist.best_parameters = nn::flatten_values(params);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto batches = plan.epoch(static_cast<std::size_t>(epoch - 1));
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      Batch b = samples.batch(batches[bi]);
      if (target_scale != 1.0f) {
        for (std::size_t k = 0; k < b.targets.size(); ++k) b.targets[k] *= target_scale;
      }
      model.zero_grad();
      const nn::Tensor<float> y = model.forward({std::move(b.images), std::move(b.boxes)});
      const auto loss = nn::mse_loss(y, b.targets);
      if (!std::isfinite(loss.value)) {
        std::ostringstream os;
        os << "non-finite loss at epoch " << epoch << ", batch " << bi + 1
           << ", max |activation| " << model.max_abs_activation();
        throw TrainingDiverged(os.str());
      }
      model.backward(loss.grad);
      adam.step(params);
      loss_sum += static_cast<double>(loss.value) * static_cast<double>(batches[bi].size());
      seen += batches[bi].size();
    }
    EpochStats st;
    st.epoch = epoch;
    st.loss = loss_sum / static_cast<double>(seen);
    if (!test_records.empty()) {
      st.test = evaluate_model(model, samples, dataset, test_records, cfg.normalize_targets)
                    .summary;
    }
    st.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double score = test_records.empty() ? static_cast<double>(epoch) : st.test.mIoU;
    if (score > hist.best_miou) {
      hist.best_miou = score;
      hist.best_epoch = epoch;
      hist.best_parameters = nn::flatten_values(params);
    }
    hist.epochs.push_back(st);
    if (on_epoch) on_epoch(st);
  }
  hist.steps = adam.steps();
  nn::assign_values<float>(params, hist.best_parameters);
  return hist;
}

// ---------------------------------------------------------------------------
// Baselines

std::optional<BevBox> ipm_predict(const CameraModel& cam, const BevGrid& grid,
                                  const PvBox& pv_box, double length_prior_m) {
  Eigen::Matrix3d h;
  try {
    h = homography_matrix(cam, grid);
  } catch (const SingularConfiguration&) {
    return std::nullopt;
  }
  const auto left = apply_homography(h, {pv_box.u_min, pv_box.v_max});
  const auto right = apply_homography(h, {pv_box.u_max, pv_box.v_max});
  if (!left || !right) return std::nullopt;
  const double size = grid.size_px;
  const double near_v = std::max(left->v, right->v);
  const double far_v = near_v - length_prior_m * grid.px_per_m;
  BevBox b{std::clamp(std::min(left->u, right->u), 0.0, size), std::clamp(far_v, 0.0, size),
           std::clamp(std::max(left->u, right->u), 0.0, size), std::clamp(near_v, 0.0, size)};
  if (!(b.width() > 0.0) || !(b.height() > 0.0)) return std::nullopt;
  return b;
}

BevBox mean_target_box(const Dataset& dataset, std::span<const std::size_t> records) {
  require(!records.empty(), "mean_target_box: no records");
  double s[4] = {0, 0, 0, 0};
  for (std::size_t id : records) {
    const BevBox& b = dataset.record(id).bbox_bev;
    s[0] += b.u_min;
    s[1] += b.v_min;
    s[2] += b.u_max;
    s[3] += b.v_max;
  }
  const double n = static_cast<double>(records.size());
  return BevBox{s[0] / n, s[1] / n, s[2] / n, s[3] / n};
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(const std::filesystem::path& path, BevNet<float>& model,
                     std::uint64_t seed, std::int64_t step, const json& extra) {
  const auto params = model.parameters();
  const std::vector<float> flat = nn::flatten_values(params);
  const json header = {{"format", "bevloc-checkpoint"},
                       {"version", 1},
                       {"arch", model.arch().to_json()},
                       {"layers", model.layer_specs()},
                       {"seed", seed},
                       {"step", step},
                       {"parameter_count", flat.size()},
                       {"extra", extra}};
  const std::string text = header.dump();
  std::string blob(8 + text.size() + flat.size() * 4, '\0');
  std::uint64_t len = text.size();
  if constexpr (std::endian::native == std::endian::big) len = __builtin_bswap64(len);
  std::memcpy(blob.data(), &len, 8);
  std::memcpy(blob.data() + 8, text.data(), text.size());
  char* p = blob.data() + 8 + text.size();
  for (float v : flat) {
    std::uint32_t w = std::bit_cast<std::uint32_t>(v);
    if constexpr (std::endian::native == std::endian::big) w = __builtin_bswap32(w);
    std::memcpy(p, &w, 4);
    p += 4;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw std::runtime_error("checkpoint write failed: " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), 8);
  if constexpr (std::endian::native == std::endian::big) len = __builtin_bswap64(len);
  if (!in || len > (1u << 26)) throw std::runtime_error("checkpoint: bad header length");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("checkpoint: truncated header");
  const json header = json::parse(text);
  if (header.value("format", std::string()) != "bevloc-checkpoint") {
    throw std::runtime_error("checkpoint: not a bevloc checkpoint");
  }
  Checkpoint c;
  c.arch = ArchConfig::from_json(header.at("arch"));
  c.seed = header.at("seed").get<std::uint64_t>();
  c.step = header.at("step").get<std::int64_t>();
  c.extra = header.value("extra", json::object());
  const std::size_t count = header.at("parameter_count").get<std::size_t>();
  c.parameters.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t w = 0;
    in.read(reinterpret_cast<char*>(&w), 4);
    if (!in) throw std::runtime_error("checkpoint: truncated parameter blob");
    if constexpr (std::endian::native == std::endian::big) w = __builtin_bswap32(w);
    c.parameters[i] = std::bit_cast<float>(w);
  }
  BevNet<float> probe(c.arch);
  if (probe.layer_specs() != header.at("layers")) {
    throw std::runtime_error("checkpoint: layer specs do not match the architecture");
  }
  return c;
}

BevNet<float> load_model(const Checkpoint& ckpt) {
  BevNet<float> net(ckpt.arch);
  const auto params = net.parameters();
  if (net.parameter_count() != ckpt.parameters.size()) {
    throw std::runtime_error("checkpoint: parameter count mismatch");
  }
  nn::assign_values<float>(params, ckpt.parameters);
  net.zero_grad();
  return net;
}

}  // namespace bevloc
