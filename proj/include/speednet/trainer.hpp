#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "speednet/checkpoint.hpp"
#include "speednet/dataset.hpp"
#include "speednet/metrics.hpp"
#include "speednet/model.hpp"
#include "speednet/run_config.hpp"

namespace speednet {

// Parameters plus BatchNorm running statistics, in visit order.
std::vector<NamedTensor> export_model_state(SpeedNet<float>& model);
void import_model_state(SpeedNet<float>& model, const std::vector<NamedTensor>& tensors, const std::string& source);

struct EvalResult {
  std::vector<ImageMetrics> per_image;
  Report report;
};

// Infer-mode evaluation over samples; per-image confusion at `threshold`.
EvalResult evaluate_model(SpeedNet<float>& model, const std::vector<Sample>& samples, int img_size,
                          double threshold = 0.5, int batch_size = 4);

struct TrainResult {
  int epochs_run = 0;
  double final_train_loss = 0.0;
  MetricSet final_train_metrics;
  double best_loss = 0.0;
  int best_epoch = 0;
  std::string checkpoint_path;
  std::string best_checkpoint_path;
  std::string log_path;
};

// Full training run: scan, stratified split, per-batch forward/Tversky/
// backward/Adam, per-epoch plateau scheduling and train-split evaluation.
// Writes the metrics log, the final checkpoint, and a best-loss checkpoint.
// Deterministic: (seed, config, data) fix every logged number and byte.
TrainResult train_run(const RunConfig& cfg, std::ostream& console, const std::string& resume_path = "");

// Image (b=1) tensor from a file, optionally nearest-resized to img_size.
Tensor4f load_image_tensor(const std::string& path, int img_size, bool allow_resize);

// 8-bit mask PNG: 255 where probability > threshold.
void write_mask_png(const std::string& path, const Tensor4f& pred, double threshold = 0.5);

}  // namespace speednet
