#include "speednet/metrics.hpp"

#include <cstdio>

#include "speednet/errors.hpp"

namespace speednet {

MetricSet metrics(const ConfusionCounts& c) {
  MetricSet m;
  const double tp = static_cast<double>(c.tp);
  const double fp = static_cast<double>(c.fp);
  const double fn = static_cast<double>(c.fn);
  const double union_size = tp + fp + fn;
  if (union_size == 0.0) {
    m.dice = 1.0;
    m.jaccard = 1.0;
  } else {
    m.dice = 2.0 * tp / (2.0 * tp + fp + fn);
    m.jaccard = tp / union_size;
  }
  m.precision = (tp + fp) == 0.0 ? 0.0 : tp / (tp + fp);
  m.recall = (tp + fn) == 0.0 ? 0.0 : tp / (tp + fn);
  return m;
}

Report aggregate(const std::vector<ImageMetrics>& per_image) {
  if (per_image.empty()) throw Error("aggregate: empty metric list");

  Report rep;
  auto row_for = [&rep](const std::string& cls) -> ReportRow& {
    for (auto& r : rep.per_class) {
      if (r.class_name == cls) return r;
    }
    rep.per_class.push_back(ReportRow{cls, {}, 0});
    return rep.per_class.back();
  };

  for (const auto& im : per_image) {
    ReportRow& r = row_for(im.class_name);
    r.mean.dice += im.m.dice;
    r.mean.jaccard += im.m.jaccard;
    r.mean.precision += im.m.precision;
    r.mean.recall += im.m.recall;
    ++r.images;

    rep.overall.mean.dice += im.m.dice;
    rep.overall.mean.jaccard += im.m.jaccard;
    rep.overall.mean.precision += im.m.precision;
    rep.overall.mean.recall += im.m.recall;
    ++rep.overall.images;
  }

  auto finish = [](ReportRow& r) {
    const double n = static_cast<double>(r.images);
    r.mean.dice /= n;
    r.mean.jaccard /= n;
    r.mean.precision /= n;
    r.mean.recall /= n;
  };
  for (auto& r : rep.per_class) finish(r);
  rep.overall.class_name = "overall";
  finish(rep.overall);
  return rep;
}

namespace {

void append_row(std::string& out, const ReportRow& r, bool csv) {
  char buf[256];
  if (csv) {
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%.6f,%zu\n", r.class_name.c_str(), r.mean.dice,
                  r.mean.jaccard, r.mean.precision, r.mean.recall, r.images);
  } else {
    std::snprintf(buf, sizeof(buf), "%-18s %8.4f %8.4f %10.4f %8.4f %8zu\n", r.class_name.c_str(), r.mean.dice,
                  r.mean.jaccard, r.mean.precision, r.mean.recall, r.images);
  }
  out += buf;
}

}  // namespace

std::string report_text(const Report& r) {
  std::string out;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%-18s %8s %8s %10s %8s %8s\n", "class", "dice", "jaccard", "precision", "recall",
                "images");
  out += buf;
  for (const auto& row : r.per_class) append_row(out, row, false);
  append_row(out, r.overall, false);
  return out;
}

std::string report_csv(const Report& r) {
  std::string out = "class,dice,jaccard,precision,recall,images\n";
  for (const auto& row : r.per_class) append_row(out, row, true);
  append_row(out, r.overall, true);
  return out;
}

}  // namespace speednet
