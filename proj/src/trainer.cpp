#include "speednet/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <unordered_map>

#include "speednet/image_io.hpp"
#include "speednet/loss.hpp"
#include "speednet/optim.hpp"

namespace speednet {

std::vector<NamedTensor> export_model_state(SpeedNet<float>& model) {
  std::vector<NamedTensor> out;
  model.visit_params([&](const std::string& name, Param<float>& p) { out.push_back({name, p.value}); });
  model.visit_buffers([&](const std::string& name, Tensor4f& b) { out.push_back({name, b}); });
  return out;
}

void import_model_state(SpeedNet<float>& model, const std::vector<NamedTensor>& tensors, const std::string& source) {
  std::unordered_map<std::string, const Tensor4f*> by_name;
  for (const auto& nt : tensors) by_name.emplace(nt.name, &nt.tensor);

  auto assign = [&](const std::string& name, Tensor4f& dst) {
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw IoError(source + ": checkpoint missing tensor '" + name + "'");
    if (!(it->second->shape() == dst.shape())) {
      throw ShapeError(source + ": tensor '" + name + "' has shape " + it->second->shape().str() + ", expected " +
                       dst.shape().str());
    }
    dst = *it->second;
  };
  model.visit_params([&](const std::string& name, Param<float>& p) { assign(name, p.value); });
  model.visit_buffers([&](const std::string& name, Tensor4f& b) { assign(name, b); });
}

EvalResult evaluate_model(SpeedNet<float>& model, const std::vector<Sample>& samples, int img_size, double threshold,
                          int batch_size) {
  if (samples.empty()) throw Error("evaluate_model: empty sample list");
  EvalResult result;
  result.per_image.reserve(samples.size());
  for (std::size_t start = 0; start < samples.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t count = std::min(static_cast<std::size_t>(batch_size), samples.size() - start);
    auto [images, masks] = load_batch(samples, start, count, img_size);
    const Tensor4f pred = model.forward(images, Mode::Infer);
    for (std::size_t b = 0; b < count; ++b) {
      Tensor4f pred_one(1, 1, img_size, img_size), mask_one(1, 1, img_size, img_size);
      const float* pp = pred.plane(static_cast<i64>(b), 0);
      const float* mp = masks.plane(static_cast<i64>(b), 0);
      std::copy(pp, pp + pred_one.numel(), pred_one.data.begin());
      std::copy(mp, mp + mask_one.numel(), mask_one.data.begin());
      result.per_image.push_back({samples[start + b].class_name, metrics(confusion(pred_one, mask_one, threshold))});
    }
  }
  result.report = aggregate(result.per_image);
  return result;
}

namespace {

void validate_run_config(const RunConfig& cfg) {
  if (cfg.data_root.empty()) throw ConfigError("data_root is required");
  if (cfg.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (cfg.lr <= 0) throw ConfigError("lr must be > 0");
  if (cfg.alpha < 0 || cfg.alpha > 1) throw ConfigError("alpha must lie in [0,1]");
  if (cfg.beta < 0 || cfg.beta > 1) throw ConfigError("beta must lie in [0,1]");
  if (cfg.smooth < 0) throw ConfigError("smooth must be >= 0");
}

std::string log_row(int epoch, double loss, double lr, const MetricSet& m) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", epoch, loss, lr, m.dice, m.jaccard,
                m.precision, m.recall);
  return buf;
}

void save_model_checkpoint(const std::string& path, SpeedNet<float>& model, const std::string& config_text) {
  CheckpointData data;
  data.config_text = config_text;
  data.tensors = export_model_state(model);
  save_checkpoint(path, data);
}

}  // namespace

TrainResult train_run(const RunConfig& cfg, std::ostream& console, const std::string& resume_path) {
  validate_run_config(cfg);

  const DatasetIndex index = scan_dataset(cfg.data_root);
  const std::vector<Sample>* class_samples = find_class(index, cfg.class_name);
  if (!class_samples || class_samples->empty()) {
    std::string available;
    for (const auto& [name, samples] : index.classes) available += " '" + name + "'";
    throw ConfigError("class '" + cfg.class_name + "' not found or empty under " + cfg.data_root + "; available:" +
                      available);
  }

  DatasetIndex class_index;
  class_index.classes.emplace_back(cfg.class_name, *class_samples);
  const Split split = split_dataset(class_index, SplitSpec{cfg.train_fraction, cfg.seed});
  if (split.train.empty()) throw ConfigError("training split is empty (train_fraction too small?)");

  const SpeedNetConfig mc = to_model_config(cfg);
  SpeedNet<float> model(mc);
  if (!resume_path.empty()) {
    const CheckpointData data = load_checkpoint(resume_path);
    import_model_state(model, data.tensors, resume_path);
    console << "resumed from " << resume_path << "\n";
  }

  Adam<float> adam;
  adam.attach(model);
  PlateauScheduler scheduler;
  scheduler.lr = cfg.lr;
  scheduler.factor = cfg.lr_factor;
  scheduler.patience = cfg.lr_patience;
  const TverskyParams loss_params{cfg.alpha, cfg.beta, cfg.smooth};
  const std::string config_text = resolved_text(cfg);

  TrainResult result;
  result.checkpoint_path = cfg.checkpoint_out;
  result.best_checkpoint_path = cfg.best_checkpoint_path();
  result.log_path = cfg.log_path();
  result.best_loss = std::numeric_limits<double>::infinity();

  std::ofstream log(result.log_path, std::ios::trunc);
  if (!log) throw IoError("cannot open log for writing: " + result.log_path);
  log << "epoch,train_loss,lr,dice,jaccard,precision,recall\n";

  console << "training class '" << cfg.class_name << "': " << split.train.size() << " train / " << split.test.size()
          << " test images, " << count_parameters(model).trainable << " trainable parameters\n";

  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr_used = scheduler.lr;
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < split.train.size(); start += bs) {
      const std::size_t count = std::min(bs, split.train.size() - start);
      auto [images, masks] = load_batch(split.train, start, count, cfg.img_size);
      model.zero_grads();
      SpeedNet<float>::Cache cache;
      const Tensor4f pred = model.forward(images, Mode::Train, &cache);
      const auto loss = tversky_loss(pred, masks, loss_params);
      if (!std::isfinite(loss.loss)) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batches));
      }
      model.backward(cache, loss.grad);
      adam.step(lr_used);
      loss_sum += loss.loss;
      ++batches;
    }
    const double epoch_loss = loss_sum / static_cast<double>(batches);

    const EvalResult eval = evaluate_model(model, split.train, cfg.img_size);
    const MetricSet& m = eval.report.overall.mean;
    const std::string row = log_row(epoch, epoch_loss, lr_used, m);
    log << row;
    console << "epoch " << row;

    if (epoch_loss < result.best_loss - 1e-6) {
      result.best_loss = epoch_loss;
      result.best_epoch = epoch;
      save_model_checkpoint(result.best_checkpoint_path, model, config_text);
    }
    scheduler.step(epoch_loss);

    result.final_train_loss = epoch_loss;
    result.final_train_metrics = m;
    result.epochs_run = epoch;
  }

  log.flush();
  save_model_checkpoint(result.checkpoint_path, model, config_text);
  if (cfg.epochs == 0) {
    // No training happened; the initialization checkpoint doubles as best.
    save_model_checkpoint(result.best_checkpoint_path, model, config_text);
  }
  console << "checkpoint written to " << result.checkpoint_path << "\n";
  return result;
}

Tensor4f load_image_tensor(const std::string& path, int img_size, bool allow_resize) {
  const ImageU8 img = read_image(path);
  if ((img.width != img_size || img.height != img_size) && !allow_resize) {
    throw ConfigError(path + ": decoded size " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                      " does not match the model size " + std::to_string(img_size) +
                      "; pass --resize to scale it (nearest-neighbour)");
  }
  Tensor4f out(1, 3, img_size, img_size);
  for (i64 y = 0; y < img_size; ++y) {
    const int sy = allow_resize ? static_cast<int>(static_cast<i64>(y) * img.height / img_size) : static_cast<int>(y);
    for (i64 x = 0; x < img_size; ++x) {
      const int sx = allow_resize ? static_cast<int>(static_cast<i64>(x) * img.width / img_size) : static_cast<int>(x);
      const std::size_t pix = (static_cast<std::size_t>(sy) * static_cast<std::size_t>(img.width) +
                               static_cast<std::size_t>(sx)) *
                              static_cast<std::size_t>(img.channels);
      for (i64 c = 0; c < 3; ++c) {
        const std::uint8_t v = img.channels == 3 ? img.pixels[pix + static_cast<std::size_t>(c)] : img.pixels[pix];
        out(0, c, y, x) = static_cast<float>(v) / 255.0f;
      }
    }
  }
  return out;
}

void write_mask_png(const std::string& path, const Tensor4f& pred, double threshold) {
  if (pred.n != 1 || pred.c != 1) throw ShapeError("write_mask_png: expected a (1,1,H,W) prediction");
  ImageU8 mask;
  mask.width = static_cast<int>(pred.w);
  mask.height = static_cast<int>(pred.h);
  mask.channels = 1;
  mask.pixels.resize(mask.expected_size());
  for (std::size_t i = 0; i < mask.pixels.size(); ++i) {
    mask.pixels[i] = static_cast<double>(pred.data[i]) > threshold ? 255 : 0;
  }
  write_png(path, mask);
}

}  // namespace speednet
