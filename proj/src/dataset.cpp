#include "bevloc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include <openssl/evp.h>

namespace bevloc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifestName = "manifest.json";
constexpr const char* kIncompleteMarker = "INCOMPLETE";

std::string frame_id_for(std::size_t sequence) {
  std::ostringstream os;
  os << std::setw(6) << std::setfill('0') << sequence;
  return os.str();
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + p.string() + " for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("write failed: " + p.string());
}

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) {
      throw std::runtime_error("sha256: init failed");
    }
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const std::string& bytes) {
    EVP_DigestUpdate(ctx_, bytes.data(), bytes.size());
  }
  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_, md, &len);
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) {
      os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    }
    return os.str();
  }

 private:
  EVP_MD_CTX* ctx_;
};

json box_json(double a, double b, double c, double d) { return json::array({a, b, c, d}); }

template <class Box>
Box box_from(const json& j) {
  return Box{j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(),
             j.at(3).get<double>()};
}

NormStats stats_from_sums(std::span<const std::array<double, 3>> sum,
                          std::span<const std::array<double, 3>> sum_sq, double pixels) {
  NormStats s;
  for (int c = 0; c < 3; ++c) {
    double total = 0.0, total_sq = 0.0;
    for (std::size_t i = 0; i < sum.size(); ++i) {
      total += sum[i][c];
      total_sq += sum_sq[i][c];
    }
    const double mean = total / pixels;
    const double var = std::max(0.0, total_sq / pixels - mean * mean);
    s.mean[c] = mean / 255.0;
    s.std[c] = std::max(std::sqrt(var) / 255.0, kStdFloor);
  }
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Manifest

json DatasetManifest::to_json() const {
  json j;
  j["format_version"] = format_version;
  j["generator"] = generator;
  j["record_count"] = record_count;
  j["frame_count"] = frames.size();
  j["image"] = {{"width", image_width}, {"height", image_height}};
  j["grid"] = {{"size_px", grid.size_px}, {"px_per_m", grid.px_per_m}};
  if (norm) {
    j["norm_stats"] = {{"mean", norm->mean}, {"std", norm->std}};
  } else {
    j["norm_stats"] = nullptr;
  }
  j["split"] = {{"seed", split_seed}, {"train_fraction", train_fraction}};
  j["unique_bounding_boxes"] = {{"per_frame", record_count}, {"per_vehicle", unique_vehicles}};
  json fr = json::array();
  for (const auto& f : frames) {
    fr.push_back({{"frame_id", f.frame_id},
                  {"map", f.index.map},
                  {"ego", f.index.ego},
                  {"frame", f.index.frame},
                  {"weather_index", f.index.weather},
                  {"weather", f.weather},
                  {"sequence", f.sequence},
                  {"timestamp", f.timestamp},
                  {"ego_speed", f.ego_speed},
                  {"first_record", f.first_record},
                  {"record_count", f.record_count}});
  }
  j["frames"] = std::move(fr);
  json rec = json::array();
  for (const auto& r : records) {
    rec.push_back({{"frame", r.frame},
                   {"path", "frames/" + frames.at(r.frame).frame_id + "/records.json"},
                   {"offset", r.offset},
                   {"length", r.length},
                   {"vehicle_id", r.vehicle_id}});
  }
  j["records"] = std::move(rec);
  if (!checksum.empty()) j["checksum"] = checksum;
  return j;
}

DatasetManifest DatasetManifest::from_json(const json& j) {
  DatasetManifest m;
  m.format_version = j.at("format_version").get<int>();
  if (m.format_version != kFormatVersion) {
    throw std::runtime_error("unsupported dataset format_version " +
                             std::to_string(m.format_version));
  }
  m.generator = j.at("generator");
  m.record_count = j.at("record_count").get<std::size_t>();
  m.image_width = j.at("image").at("width").get<int>();
  m.image_height = j.at("image").at("height").get<int>();
  m.grid.size_px = j.at("grid").at("size_px").get<int>();
  m.grid.px_per_m = j.at("grid").at("px_per_m").get<double>();
  if (!j.at("norm_stats").is_null()) {
    NormStats s;
    s.mean = j.at("norm_stats").at("mean").get<std::array<double, 3>>();
    s.std = j.at("norm_stats").at("std").get<std::array<double, 3>>();
    m.norm = s;
  }
  m.split_seed = j.at("split").at("seed").get<std::uint64_t>();
  m.train_fraction = j.at("split").at("train_fraction").get<double>();
  m.unique_vehicles = j.at("unique_bounding_boxes").at("per_vehicle").get<std::size_t>();
  for (const auto& f : j.at("frames")) {
    FrameEntry e;
    e.frame_id = f.at("frame_id").get<std::string>();
    e.index = {f.at("map").get<int>(), f.at("ego").get<int>(), f.at("frame").get<int>(),
               f.at("weather_index").get<int>()};
    e.weather = f.at("weather").get<std::string>();
    e.sequence = f.at("sequence").get<std::size_t>();
    e.timestamp = f.at("timestamp").get<double>();
    e.ego_speed = f.at("ego_speed").get<double>();
    e.first_record = f.at("first_record").get<std::size_t>();
    e.record_count = f.at("record_count").get<std::size_t>();
    m.frames.push_back(std::move(e));
  }
  for (const auto& r : j.at("records")) {
    m.records.push_back({r.at("frame").get<std::size_t>(), r.at("offset").get<std::size_t>(),
                         r.at("length").get<std::size_t>(), r.at("vehicle_id").get<int>()});
  }
  m.checksum = j.value("checksum", std::string());
  if (m.records.size() != m.record_count) {
    throw std::runtime_error("manifest: record_count does not match the record index");
  }
  return m;
}

json record_to_json(const SceneRecord& r) {
  return {{"id", r.id},
          {"name", r.name},
          {"distance", r.distance_m},
          {"timestamp", r.timestamp},
          {"bbox_rgb", box_json(r.bbox_rgb.u_min, r.bbox_rgb.v_min, r.bbox_rgb.u_max,
                                r.bbox_rgb.v_max)},
          {"bbox_bev", box_json(r.bbox_bev.u_min, r.bbox_bev.v_min, r.bbox_bev.u_max,
                                r.bbox_bev.v_max)},
          {"speed", r.ego_speed}};
}

RecordMeta record_from_json(const json& j) {
  RecordMeta m;
  m.id = j.at("id").get<int>();
  m.name = j.at("name").get<std::string>();
  m.distance = j.at("distance").get<double>();
  m.timestamp = j.at("timestamp").get<double>();
  m.speed = j.at("speed").get<double>();
  m.bbox_rgb = box_from<PvBox>(j.at("bbox_rgb"));
  m.bbox_bev = box_from<BevBox>(j.at("bbox_bev"));
  return m;
}

// ---------------------------------------------------------------------------
// Writer

DatasetWriter::DatasetWriter(fs::path root, WriteOptions options)
    : root_(std::move(root)), options_(std::move(options)) {
  if (!(options_.train_fraction > 0.0 && options_.train_fraction < 1.0)) {
    throw std::invalid_argument("dataset: train_fraction must lie in (0, 1)");
  }
  if (fs::exists(root_ / kManifestName) || fs::exists(root_ / kIncompleteMarker)) {
    if (!options_.force) {
      throw std::runtime_error("dataset already exists at " + root_.string() +
                               " (pass force to overwrite)");
    }
    fs::remove_all(root_ / "frames");
    fs::remove(root_ / kManifestName);
  }
  fs::create_directories(root_ / "frames");
  write_file(root_ / kIncompleteMarker, "write in progress\n");
  manifest_.generator = options_.generator;
  manifest_.grid = options_.grid;
  manifest_.split_seed = options_.split_seed;
  manifest_.train_fraction = options_.train_fraction;
}

void DatasetWriter::add(const Frame& frame) {
  if (finalized_) throw std::logic_error("dataset: add after finalize");
  if (frame.sequence != manifest_.frames.size()) {
    throw std::invalid_argument("dataset: frame " + std::to_string(frame.sequence) +
                                " arrived out of order (expected " +
                                std::to_string(manifest_.frames.size()) + ")");
  }
  if (!frame.rgb || frame.rgb->empty() || !frame.depth) {
    throw std::invalid_argument("dataset: frame has no rendered images");
  }
  if (manifest_.frames.empty()) {
    manifest_.image_width = frame.rgb->width();
    manifest_.image_height = frame.rgb->height();
  } else if (frame.rgb->width() != manifest_.image_width ||
             frame.rgb->height() != manifest_.image_height) {
    throw std::invalid_argument("dataset: image size changed between frames");
  }

  FrameEntry e;
  e.frame_id = frame_id_for(frame.sequence);
  e.index = frame.index;
  e.sequence = frame.sequence;
  e.timestamp = frame.timestamp;
  e.ego_speed = frame.ego_speed;
  e.weather = std::string(weather_presets()[static_cast<int>(frame.weather)].name);
  e.first_record = manifest_.records.size();
  e.record_count = frame.records.size();

  const fs::path dir = root_ / "frames" / e.frame_id;
  try {
    fs::create_directories(dir);
    write_ppm(dir / "rgb.ppm", *frame.rgb);
    write_depth(dir / "depth.f32", *frame.depth);
    std::string body;
    if (frame.records.empty()) {
      body = "[]\n";
    } else {
      body = "[\n";
      for (std::size_t i = 0; i < frame.records.size(); ++i) {
        const std::string line = record_to_json(frame.records[i]).dump();
        manifest_.records.push_back({manifest_.frames.size(), body.size(), line.size(),
                                     frame.records[i].id});
        body += line;
        body += i + 1 < frame.records.size() ? ",\n" : "\n";
        seen_vehicles_.emplace_back(frame.index.map, frame.records[i].id);
      }
      body += "]\n";
    }
    write_file(dir / "records.json", body);
  } catch (const std::exception&) {
    throw;  // INCOMPLETE marker stays behind
  }

  ChannelSums s;
  const auto& bytes = frame.rgb->bytes();
  for (std::size_t i = 0; i < bytes.size(); i += 3) {
    for (int c = 0; c < 3; ++c) {
      const std::uint64_t v = bytes[i + c];
      s.sum[c] += v;
      s.sum_sq[c] += v * v;
    }
  }
  s.pixels = bytes.size() / 3;
  sums_.push_back(s);
  manifest_.frames.push_back(std::move(e));
}

DatasetManifest DatasetWriter::finalize() {
  if (finalized_) throw std::logic_error("dataset: finalize called twice");
  finalized_ = true;
  manifest_.record_count = manifest_.records.size();
  std::sort(seen_vehicles_.begin(), seen_vehicles_.end());
  manifest_.unique_vehicles = static_cast<std::size_t>(
      std::unique(seen_vehicles_.begin(), seen_vehicles_.end()) - seen_vehicles_.begin());

  if (!manifest_.frames.empty()) {
    const Split sp = split(manifest_, options_.train_fraction, options_.split_seed);
    if (!sp.train_frames.empty()) {
      std::vector<std::array<double, 3>> sum, sum_sq;
      double pixels = 0.0;
      for (std::size_t f : sp.train_frames) {
        const auto& cs = sums_[f];
        sum.push_back({double(cs.sum[0]), double(cs.sum[1]), double(cs.sum[2])});
        sum_sq.push_back({double(cs.sum_sq[0]), double(cs.sum_sq[1]), double(cs.sum_sq[2])});
        pixels += static_cast<double>(cs.pixels);
      }
      manifest_.norm = stats_from_sums(sum, sum_sq, pixels);
    }
  }

  Sha256 sha;
  for (const auto& f : manifest_.frames) {
    const fs::path dir = root_ / "frames" / f.frame_id;
    sha.update(read_file(dir / "rgb.ppm"));
    sha.update(read_file(dir / "depth.f32"));
    sha.update(read_file(dir / "records.json"));
  }
  manifest_.checksum.clear();
  sha.update(manifest_.to_json().dump());
  manifest_.checksum = sha.hex();
  write_file(root_ / kManifestName, manifest_.to_json().dump(2) + "\n");
  fs::remove(root_ / kIncompleteMarker);
  return manifest_;
}

DatasetManifest write_dataset(std::span<const Frame> frames, const fs::path& root,
                              const WriteOptions& options) {
  DatasetWriter w(root, options);
  for (const auto& f : frames) w.add(f);
  return w.finalize();
}

// ---------------------------------------------------------------------------
// Reader

Dataset Dataset::open(const fs::path& root) {
  if (fs::exists(root / kIncompleteMarker)) {
    throw std::runtime_error("dataset at " + root.string() + " is incomplete");
  }
  if (!fs::exists(root / kManifestName)) {
    throw std::runtime_error("no dataset manifest at " + root.string());
  }
  Dataset d;
  d.root_ = root;
  d.manifest_ = DatasetManifest::from_json(json::parse(read_file(root / kManifestName)));
  d.records_.reserve(d.manifest_.record_count);
  for (std::size_t f = 0; f < d.manifest_.frames.size(); ++f) {
    const auto& fe = d.manifest_.frames[f];
    if (fe.record_count == 0) continue;
    const json arr = json::parse(read_file(d.frame_dir(f) / "records.json"));
    if (arr.size() != fe.record_count) {
      throw std::runtime_error("frame " + fe.frame_id + ": record count mismatch");
    }
    for (const auto& r : arr) {
      RecordMeta m = record_from_json(r);
      m.frame = f;
      d.records_.push_back(std::move(m));
    }
  }
  if (d.records_.size() != d.manifest_.record_count) {
    throw std::runtime_error("dataset: records on disk do not match the manifest");
  }
  return d;
}

std::vector<std::size_t> Dataset::frame_of_records() const {
  std::vector<std::size_t> out;
  out.reserve(records_.size());
  for (const auto& r : records_) out.push_back(r.frame);
  return out;
}

fs::path Dataset::frame_dir(std::size_t frame) const {
  return root_ / "frames" / manifest_.frames.at(frame).frame_id;
}

RgbImage Dataset::load_rgb(std::size_t frame) const { return read_ppm(frame_dir(frame) / "rgb.ppm"); }

DepthMap Dataset::load_depth(std::size_t frame) const {
  return read_depth(frame_dir(frame) / "depth.f32", manifest_.image_width, manifest_.image_height);
}

SceneRecord Dataset::read_record(std::size_t i) const {
  const RecordEntry& e = manifest_.records.at(i);
  std::ifstream in(frame_dir(e.frame) / "records.json", std::ios::binary);
  if (!in) throw std::runtime_error("cannot open records for record " + std::to_string(i));
  std::string buf(e.length, '\0');
  in.seekg(static_cast<std::streamoff>(e.offset));
  in.read(buf.data(), static_cast<std::streamsize>(e.length));
  if (in.gcount() != static_cast<std::streamsize>(e.length)) {
    throw std::runtime_error("record " + std::to_string(i) + ": truncated records.json");
  }
  const RecordMeta m = record_from_json(json::parse(buf));
  SceneRecord r;
  r.id = m.id;
  r.name = m.name;
  r.distance_m = m.distance;
  r.timestamp = m.timestamp;
  r.bbox_rgb = m.bbox_rgb;
  r.bbox_bev = m.bbox_bev;
  r.ego_speed = m.speed;
  r.rgb = std::make_shared<const RgbImage>(load_rgb(e.frame));
  r.depth = std::make_shared<const DepthMap>(load_depth(e.frame));
  return r;
}

// ---------------------------------------------------------------------------
// Split / statistics

Split split(const DatasetManifest& manifest, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("split: train_fraction must lie in (0, 1)");
  }
  const std::size_t n = manifest.frames.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(
      std::clamp<long long>(std::llround(train_fraction * static_cast<double>(n)), 0,
                            static_cast<long long>(n)));
  Split s;
  s.train_frames.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test_frames.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(s.train_frames.begin(), s.train_frames.end());
  std::sort(s.test_frames.begin(), s.test_frames.end());
  for (std::size_t f : s.train_frames) {
    const auto& fe = manifest.frames[f];
    for (std::size_t k = 0; k < fe.record_count; ++k) s.train_records.push_back(fe.first_record + k);
  }
  for (std::size_t f : s.test_frames) {
    const auto& fe = manifest.frames[f];
    for (std::size_t k = 0; k < fe.record_count; ++k) s.test_records.push_back(fe.first_record + k);
  }
  s.warning = s.train_frames.empty() || s.test_frames.empty();
  return s;
}

NormStats compute_norm_stats(const Dataset& dataset, std::span<const std::size_t> frames) {
  if (frames.empty()) throw std::invalid_argument("compute_norm_stats: empty training set");
  std::vector<std::array<double, 3>> sum, sum_sq;
  double pixels = 0.0;
  for (std::size_t f : frames) {
    const RgbImage img = dataset.load_rgb(f);
    std::array<std::uint64_t, 3> s{}, sq{};
    const auto& b = img.bytes();
    for (std::size_t i = 0; i < b.size(); i += 3) {
      for (int c = 0; c < 3; ++c) {
        const std::uint64_t v = b[i + c];
        s[c] += v;
        sq[c] += v * v;
      }
    }
    sum.push_back({double(s[0]), double(s[1]), double(s[2])});
    sum_sq.push_back({double(sq[0]), double(sq[1]), double(sq[2])});
    pixels += static_cast<double>(b.size() / 3);
  }
  return stats_from_sums(sum, sum_sq, pixels);
}

// ---------------------------------------------------------------------------
// Batching

BatchPlan::BatchPlan(std::vector<std::size_t> record_ids,
                     std::span<const std::size_t> frame_of_record, std::size_t batch_size,
                     std::uint64_t seed, BoxSampling sampling)
    : batch_size_(batch_size), seed_(seed), sampling_(sampling) {
  if (batch_size == 0) throw std::invalid_argument("batches: batch_size must be >= 1");
  std::sort(record_ids.begin(), record_ids.end());
  std::map<std::size_t, std::vector<std::size_t>> by_frame;
  for (std::size_t id : record_ids) by_frame[frame_of_record[id]].push_back(id);
  for (auto& [frame, ids] : by_frame) groups_.push_back(std::move(ids));
}

std::size_t BatchPlan::samples_per_epoch() const {
  if (sampling_ == BoxSampling::OnePerFrame) return groups_.size();
  std::size_t n = 0;
  for (const auto& g : groups_) n += g.size();
  return n;
}

std::vector<std::vector<std::size_t>> BatchPlan::epoch(std::size_t epoch_index) const {
  std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                    static_cast<std::uint32_t>(epoch_index),
                    static_cast<std::uint32_t>(epoch_index >> 32)};
  std::mt19937_64 rng(seq);
  std::vector<std::size_t> order;
  if (sampling_ == BoxSampling::OnePerFrame) {
    for (const auto& g : groups_) {
      std::uniform_int_distribution<std::size_t> pick(0, g.size() - 1);
      order.push_back(g[pick(rng)]);
    }
  } else {
    for (const auto& g : groups_) order.insert(order.end(), g.begin(), g.end());
  }
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); i += batch_size_) {
    const std::size_t end = std::min(order.size(), i + batch_size_);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Samples

SampleBuilder::SampleBuilder(const Dataset& dataset, NormStats stats, int downsample,
                             bool with_images)
    : dataset_(&dataset), stats_(stats), downsample_(downsample), with_images_(with_images),
      cache_(dataset.frame_count()) {
  if (downsample < 1) throw std::invalid_argument("samples: downsample must be >= 1");
  if (with_images && (input_width() < 1 || input_height() < 1)) {
    throw std::invalid_argument("samples: downsample factor leaves an empty image");
  }
}

int SampleBuilder::input_width() const { return dataset_->manifest().image_width / downsample_; }
int SampleBuilder::input_height() const {
  return dataset_->manifest().image_height / downsample_;
}

std::array<float, 4> SampleBuilder::normalize_box(const PvBox& b) const {
  const double w = dataset_->manifest().image_width;
  const double h = dataset_->manifest().image_height;
  return {static_cast<float>(b.u_min / w), static_cast<float>(b.v_min / h),
          static_cast<float>(b.u_max / w), static_cast<float>(b.v_max / h)};
}

nn::Tensor<float> SampleBuilder::preprocess(const RgbImage& img) const {
  const int k = downsample_;
  const int ow = img.width() / k;
  const int oh = img.height() / k;
  nn::Tensor<float> t({3, static_cast<std::size_t>(oh), static_cast<std::size_t>(ow)});
  const double inv = 1.0 / (255.0 * k * k);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        double acc = 0.0;
        for (int dy = 0; dy < k; ++dy) {
          for (int dx = 0; dx < k; ++dx) {
            const Rgb8 p = img.at(x * k + dx, y * k + dy);
            acc += c == 0 ? p.r : (c == 1 ? p.g : p.b);
          }
        }
        t[(static_cast<std::size_t>(c) * oh + y) * ow + x] =
            static_cast<float>((acc * inv - stats_.mean[c]) / stats_.std[c]);
      }
    }
  }
  return t;
}

const nn::Tensor<float>& SampleBuilder::frame_tensor(std::size_t frame) const {
  auto& slot = cache_.at(frame);
  if (!slot) slot = preprocess(dataset_->load_rgb(frame));
  return *slot;
}

Sample SampleBuilder::sample(std::size_t record) const {
  const RecordMeta& m = dataset_->record(record);
  Sample s;
  if (with_images_) s.image = frame_tensor(m.frame);
  s.pv_box_norm = normalize_box(m.bbox_rgb);
  s.target_bev = m.bbox_bev;
  return s;
}

Batch SampleBuilder::batch(std::span<const std::size_t> ids) const {
  Batch b;
  b.ids.assign(ids.begin(), ids.end());
  const std::size_t n = ids.size();
  const double size = dataset_->manifest().grid.size_px;
  b.boxes = nn::Tensor<float>({n, 4});
  b.targets = nn::Tensor<float>({n, 4});
  const auto iw = static_cast<std::size_t>(input_width());
  const auto ih = static_cast<std::size_t>(input_height());
  if (with_images_) b.images = nn::Tensor<float>({n, 3, ih, iw});
  for (std::size_t i = 0; i < n; ++i) {
    const RecordMeta& m = dataset_->record(ids[i]);
    const auto pv = normalize_box(m.bbox_rgb);
    std::copy(pv.begin(), pv.end(), b.boxes.data() + i * 4);
    const BevBox& t = m.bbox_bev;
    b.targets[i * 4 + 0] = static_cast<float>(t.u_min / size);
    b.targets[i * 4 + 1] = static_cast<float>(t.v_min / size);
    b.targets[i * 4 + 2] = static_cast<float>(t.u_max / size);
    b.targets[i * 4 + 3] = static_cast<float>(t.v_max / size);
    if (with_images_) {
      const auto& img = frame_tensor(m.frame);
      std::copy(img.values().begin(), img.values().end(), b.images.data() + i * img.size());
    }
  }
  return b;
}

}  // namespace bevloc
