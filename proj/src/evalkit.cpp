#include "bevloc/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace bevloc {

IouResult iou(const BevBox& p, const BevBox& t) {
  const double iw = std::max(0.0, std::min(p.u_max, t.u_max) - std::max(p.u_min, t.u_min));
  const double ih = std::max(0.0, std::min(p.v_max, t.v_max) - std::max(p.v_min, t.v_min));
  const double inter = iw * ih;
  const double uni = p.area() + t.area() - inter;
  if (!(uni > 0.0)) return {0.0, true};
  return {inter / uni, false};
}

double centroid_distance(const BevBox& p, const BevBox& t) {
  const PixelPoint a = p.center();
  const PixelPoint b = t.center();
  return std::hypot(a.u - b.u, a.v - b.v);
}

HeightWidthError height_width_error(const BevBox& p, const BevBox& t) {
  HeightWidthError e;
  if (t.height() > 0.0) e.height = std::abs(p.height() - t.height()) / t.height();
  if (t.width() > 0.0) e.width = std::abs(p.width() - t.width()) / t.width();
  return e;
}

std::optional<double> aspect_ratio_error(const BevBox& p, const BevBox& t) {
  if (!(p.height() > 0.0) || !(t.height() > 0.0)) return std::nullopt;
  return std::abs(p.width() / p.height() - t.width() / t.height());
}

Evaluation evaluate_predictions(std::span<const EvalItem> items,
                                std::span<const std::optional<BevBox>> predictions,
                                double px_per_m) {
  if (items.size() != predictions.size()) {
    throw std::invalid_argument("evaluate: prediction count does not match item count");
  }
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return items[a].record_id < items[b].record_id;
  });

  Evaluation ev;
  ev.rows.reserve(items.size());
  double s_iou = 0, s_cd = 0, s_he = 0, s_we = 0, s_are = 0;
  auto& s = ev.summary;
  for (std::size_t k : order) {
    const EvalItem& item = items[k];
    RecordMetrics row;
    row.record_id = item.record_id;
    const auto& pred = predictions[k];
    if (!pred) {
      row.skipped = true;
    } else {
      const IouResult r = iou(*pred, item.target);
      if (r.degenerate) {
        row.skipped = true;
      } else {
        row.iou = r.value;
        row.cd_px = centroid_distance(*pred, item.target);
        row.cd_m = pixels_to_meters(row.cd_px, px_per_m);
        const auto hw = height_width_error(*pred, item.target);
        row.he = hw.height;
        row.we = hw.width;
        row.are = aspect_ratio_error(*pred, item.target);
      }
    }
    if (row.skipped) {
      ++s.skipped;
    } else {
      ++s.n;
      s_iou += row.iou;
      s_cd += row.cd_px;
      if (row.he) { s_he += *row.he; ++s.n_he; }
      if (row.we) { s_we += *row.we; ++s.n_we; }
      if (row.are) { s_are += *row.are; ++s.n_are; }
    }
    ev.rows.push_back(row);
  }
  const auto mean = [](double sum, std::size_t n) { return n ? sum / static_cast<double>(n) : 0.0; };
  s.mIoU = mean(s_iou, s.n);
  s.mCD = mean(s_cd, s.n);
  s.mhE = mean(s_he, s.n_he);
  s.mwE = mean(s_we, s.n_we);
  s.marE = mean(s_are, s.n_are);
  return ev;
}

Evaluation evaluate(const Predictor& predictor, std::span<const EvalItem> items,
                    double px_per_m) {
  std::vector<std::optional<BevBox>> preds;
  preds.reserve(items.size());
  for (const auto& it : items) preds.push_back(predictor(it.record_id));
  return evaluate_predictions(items, preds, px_per_m);
}

void write_summary_json(const std::filesystem::path& path, const MetricsSummary& s,
                        std::optional<double> px_per_m_for_meters) {
  nlohmann::json j;
  j["mIoU"] = s.mIoU;
  j["mCD"] = s.mCD;
  j["mhE"] = s.mhE;
  j["mwE"] = s.mwE;
  j["marE"] = s.marE;
  j["n"] = s.n;
  j["skipped"] = s.skipped;
  j["counts"] = {{"hE", s.n_he}, {"wE", s.n_we}, {"arE", s.n_are}};
  if (px_per_m_for_meters) j["mCD_m"] = pixels_to_meters(s.mCD, *px_per_m_for_meters);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_per_record_csv(const std::filesystem::path& path, std::span<const RecordMetrics> rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "record_id,iou,cd_px,cd_m,he,we,are,skipped,he_skipped,we_skipped,are_skipped\n";
  out << std::setprecision(17);
  const auto opt = [](const std::optional<double>& v) {
    std::ostringstream os;
    os << std::setprecision(17);
    if (v) os << *v;
    return os.str();
  };
  for (const auto& r : rows) {
    out << r.record_id << ',' << r.iou << ',' << r.cd_px << ',' << r.cd_m << ',' << opt(r.he)
        << ',' << opt(r.we) << ',' << opt(r.are) << ',' << (r.skipped ? 1 : 0) << ','
        << (r.he ? 0 : 1) << ',' << (r.we ? 0 : 1) << ',' << (r.are ? 0 : 1) << '\n';
  }
}

}  // namespace bevloc
