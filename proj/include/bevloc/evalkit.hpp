#ifndef BEVLOC_EVALKIT_HPP_
#define BEVLOC_EVALKIT_HPP_

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "bevloc/geometry.hpp"

namespace bevloc {

struct IouResult {
  double value = 0.0;
  bool degenerate = false;  // union had zero area
};

/// Intersection over union with continuous areas.
IouResult iou(const BevBox& pred, const BevBox& target);

/// Euclidean distance between box centers, in pixels.
double centroid_distance(const BevBox& pred, const BevBox& target);

inline double pixels_to_meters(double px, double px_per_m) { return px / px_per_m; }

struct HeightWidthError {
  std::optional<double> height;  // |h_p - h_t| / h_t, absent when h_t == 0
  std::optional<double> width;
};

HeightWidthError height_width_error(const BevBox& pred, const BevBox& target);

/// |w_p / h_p - w_t / h_t|; absent when either height is zero.
std::optional<double> aspect_ratio_error(const BevBox& pred, const BevBox& target);

struct MetricsSummary {
  double mIoU = 0.0;
  double mCD = 0.0;  // pixels
  double mhE = 0.0;  // fractions, not percentages
  double mwE = 0.0;
  double marE = 0.0;
  std::size_t n = 0;        // records that entered the IoU/CD means
  std::size_t skipped = 0;  // absent predictions or degenerate unions
  std::size_t n_he = 0;
  std::size_t n_we = 0;
  std::size_t n_are = 0;
};

struct RecordMetrics {
  std::size_t record_id = 0;
  bool skipped = false;
  double iou = 0.0;
  double cd_px = 0.0;
  double cd_m = 0.0;
  std::optional<double> he;
  std::optional<double> we;
  std::optional<double> are;
};

struct EvalItem {
  std::size_t record_id = 0;
  BevBox target;
};

struct Evaluation {
  MetricsSummary summary;
  std::vector<RecordMetrics> rows;  // sorted by record id
};

using Predictor = std::function<std::optional<BevBox>(std::size_t record_id)>;

/// Unweighted per-record means over non-skipped records. Items are reduced
/// in record-id order, so the result does not depend on input order.
Evaluation evaluate(const Predictor& predictor, std::span<const EvalItem> items,
                    double px_per_m = 4.0);

/// Same, for predictions already computed (absent entries count as skipped).
Evaluation evaluate_predictions(std::span<const EvalItem> items,
                                std::span<const std::optional<BevBox>> predictions,
                                double px_per_m = 4.0);

void write_summary_json(const std::filesystem::path& path, const MetricsSummary& s,
                        std::optional<double> px_per_m_for_meters = std::nullopt);
void write_per_record_csv(const std::filesystem::path& path,
                          std::span<const RecordMetrics> rows);

}  // namespace bevloc

#endif  // BEVLOC_EVALKIT_HPP_
