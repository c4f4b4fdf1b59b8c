#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "speednet/model.hpp"

namespace speednet {

// A training/evaluation run, resolved from a line-oriented `key = value`
// file plus command-line overrides. Unknown keys are errors.
struct RunConfig {
  std::string data_root;
  std::string class_name = "synthetic";  // key: class
  int img_size = 224;
  int epochs = 120;
  int batch_size = 4;
  double lr = 0.001;
  double lr_factor = 0.1;
  int lr_patience = 12;
  double alpha = 0.3;
  double beta = 0.7;
  double smooth = 1.0;
  std::string variant = "full";
  std::uint64_t seed = 0;
  std::string checkpoint_out = "speednet.ckpt";
  int involution_k = 3;
  int involution_r = 4;
  std::string dilations = "1,2,4";
  std::string channels = "32,32,64,128";
  int bottleneck_channels = 64;
  double train_fraction = 0.8;
  std::string log_out;  // defaults to checkpoint_out + ".log"

  std::string log_path() const { return log_out.empty() ? checkpoint_out + ".log" : log_out; }
  std::string best_checkpoint_path() const { return checkpoint_out + ".best"; }
};

// Applies one key/value pair; throws ConfigError naming unknown keys or
// unparsable values.
void set_config_key(RunConfig& cfg, const std::string& key, const std::string& value);

// Parses a config file (blank lines and '#' comments allowed).
RunConfig parse_config_file(const std::string& path);

// Canonical serialization: every key, fixed order, one per line. Embedded in
// checkpoints and echoed at run start.
std::string resolved_text(const RunConfig& cfg);

RunConfig config_from_text(const std::string& text);

std::vector<int> parse_int_list(const std::string& csv, const std::string& what);

// Model architecture from the run configuration (validates).
SpeedNetConfig to_model_config(const RunConfig& cfg);

}  // namespace speednet
