#pragma once

#include <string>
#include <vector>

#include "speednet/tensor.hpp"

namespace speednet {

struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
};

struct MetricSet {
  double dice = 0.0;
  double jaccard = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

// Binarize pred at `threshold` and tally pixel counts against the binary mask.
template <typename T>
ConfusionCounts confusion(const Tensor4<T>& pred, const Tensor4<T>& gt, double threshold = 0.5) {
  require_same_shape(pred, gt, "confusion");
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const bool p = static_cast<double>(pred.data[i]) > threshold;
    const bool t = gt.data[i] > T(0.5);
    if (p && t) {
      ++c.tp;
    } else if (p && !t) {
      ++c.fp;
    } else if (!p && t) {
      ++c.fn;
    } else {
      ++c.tn;
    }
  }
  return c;
}

// Dice, Jaccard, precision, recall from raw counts (no smoothing, so
// J = D/(2-D) holds exactly). Empty-union dice/jaccard are defined as 1;
// other 0/0 cases as 0.
MetricSet metrics(const ConfusionCounts& c);

struct ImageMetrics {
  std::string class_name;
  MetricSet m;
};

struct ReportRow {
  std::string class_name;
  MetricSet mean;
  std::size_t images = 0;
};

struct Report {
  std::vector<ReportRow> per_class;  // in first-seen order
  ReportRow overall;                 // unweighted mean over all images of all classes
};

// Unweighted per-class means plus an overall row over every image.
Report aggregate(const std::vector<ImageMetrics>& per_image);

// Table 1 style text: one row per class, then the overall row.
std::string report_text(const Report& r);

// Machine-readable form: a header line, one row per class, one overall row.
std::string report_csv(const Report& r);

}  // namespace speednet
