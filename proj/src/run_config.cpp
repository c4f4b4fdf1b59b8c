#include "speednet/run_config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "speednet/errors.hpp"

namespace speednet {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

int parse_int(const std::string& key, const std::string& value) {
  int out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("key '" + key + "': expected an integer, got '" + value + "'");
  }
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + value + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double out = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a number, got '" + value + "'");
  }
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void set_config_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "data_root") {
    cfg.data_root = value;
  } else if (key == "class") {
    cfg.class_name = value;
  } else if (key == "img_size") {
    cfg.img_size = parse_int(key, value);
  } else if (key == "epochs") {
    cfg.epochs = parse_int(key, value);
  } else if (key == "batch_size") {
    cfg.batch_size = parse_int(key, value);
  } else if (key == "lr") {
    cfg.lr = parse_double(key, value);
  } else if (key == "lr_factor") {
    cfg.lr_factor = parse_double(key, value);
  } else if (key == "lr_patience") {
    cfg.lr_patience = parse_int(key, value);
  } else if (key == "alpha") {
    cfg.alpha = parse_double(key, value);
  } else if (key == "beta") {
    cfg.beta = parse_double(key, value);
  } else if (key == "smooth") {
    cfg.smooth = parse_double(key, value);
  } else if (key == "variant") {
    (void)parse_variant(value);  // validate now, store canonical string
    cfg.variant = value;
  } else if (key == "seed") {
    cfg.seed = parse_u64(key, value);
  } else if (key == "checkpoint_out") {
    cfg.checkpoint_out = value;
  } else if (key == "involution_k") {
    cfg.involution_k = parse_int(key, value);
  } else if (key == "involution_r") {
    cfg.involution_r = parse_int(key, value);
  } else if (key == "dilations") {
    cfg.dilations = value;
  } else if (key == "channels") {
    cfg.channels = value;
  } else if (key == "bottleneck_channels") {
    cfg.bottleneck_channels = parse_int(key, value);
  } else if (key == "train_fraction") {
    cfg.train_fraction = parse_double(key, value);
  } else if (key == "log_out") {
    cfg.log_out = value;
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  RunConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string text = trim(line);
    if (text.empty()) continue;
    const std::size_t eq = text.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected 'key = value', got '" + text + "'");
    }
    set_config_key(cfg, trim(text.substr(0, eq)), trim(text.substr(eq + 1)));
  }
  return cfg;
}

std::string resolved_text(const RunConfig& cfg) {
  std::ostringstream out;
  out << "data_root = " << cfg.data_root << "\n";
  out << "class = " << cfg.class_name << "\n";
  out << "img_size = " << cfg.img_size << "\n";
  out << "epochs = " << cfg.epochs << "\n";
  out << "batch_size = " << cfg.batch_size << "\n";
  out << "lr = " << format_double(cfg.lr) << "\n";
  out << "lr_factor = " << format_double(cfg.lr_factor) << "\n";
  out << "lr_patience = " << cfg.lr_patience << "\n";
  out << "alpha = " << format_double(cfg.alpha) << "\n";
  out << "beta = " << format_double(cfg.beta) << "\n";
  out << "smooth = " << format_double(cfg.smooth) << "\n";
  out << "variant = " << cfg.variant << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "checkpoint_out = " << cfg.checkpoint_out << "\n";
  out << "involution_k = " << cfg.involution_k << "\n";
  out << "involution_r = " << cfg.involution_r << "\n";
  out << "dilations = " << cfg.dilations << "\n";
  out << "channels = " << cfg.channels << "\n";
  out << "bottleneck_channels = " << cfg.bottleneck_channels << "\n";
  out << "train_fraction = " << format_double(cfg.train_fraction) << "\n";
  out << "log_out = " << cfg.log_out << "\n";
  return out.str();
}

RunConfig config_from_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("embedded config: expected 'key = value', got '" + t + "'");
    set_config_key(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return cfg;
}

std::vector<int> parse_int_list(const std::string& csv, const std::string& what) {
  std::vector<int> out;
  std::string item;
  std::istringstream in(csv);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(parse_int(what, item));
  }
  if (out.empty()) throw ConfigError(what + ": empty list '" + csv + "'");
  return out;
}

SpeedNetConfig to_model_config(const RunConfig& cfg) {
  SpeedNetConfig mc;
  mc.img_size = cfg.img_size;
  const auto ch = parse_int_list(cfg.channels, "channels");
  if (ch.size() != 4) throw ConfigError("channels: expected 4 comma-separated values, got '" + cfg.channels + "'");
  for (std::size_t i = 0; i < 4; ++i) mc.channels[i] = ch[i];
  const auto dil = parse_int_list(cfg.dilations, "dilations");
  if (dil.size() != 3) throw ConfigError("dilations: expected 3 comma-separated values, got '" + cfg.dilations + "'");
  for (std::size_t i = 0; i < 3; ++i) mc.dilations[i] = dil[i];
  mc.bottleneck_channels = cfg.bottleneck_channels;
  mc.involution_k = cfg.involution_k;
  mc.involution_r = cfg.involution_r;
  mc.variant = parse_variant(cfg.variant);
  mc.seed = cfg.seed;
  mc.validate();
  return mc;
}

}  // namespace speednet
