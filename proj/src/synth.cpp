#include "speednet/synth.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "speednet/errors.hpp"
#include "speednet/tensor.hpp"

namespace fs = std::filesystem;

namespace speednet {

bool ellipse_contains(const Ellipse& e, double x, double y) {
  const double dx = x - e.cx;
  const double dy = y - e.cy;
  const double u = (dx * std::cos(e.theta) + dy * std::sin(e.theta)) / e.a;
  const double v = (-dx * std::sin(e.theta) + dy * std::cos(e.theta)) / e.b;
  return u * u + v * v <= 1.0;
}

std::vector<SynthSample> synth_dataset(int n, int size, std::uint64_t seed) {
  if (size < 16) throw ConfigError("synth_dataset: size must be >= 16, got " + std::to_string(size));
  if (n < 1) throw ConfigError("synth_dataset: n must be >= 1");

  std::mt19937_64 rng(seed);
  const double s = static_cast<double>(size);
  constexpr double pi = 3.14159265358979323846;

  std::vector<SynthSample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    SynthSample sample;

    // Ellipse with area fraction in [0.10, 0.30], fully inside the frame.
    const double area_frac = 0.10 + 0.20 * canonical(rng);
    const double aspect = 0.6 + 1.0 * canonical(rng);
    const double ab = area_frac * s * s / pi;
    sample.ellipse.a = std::sqrt(ab * aspect);
    sample.ellipse.b = ab / sample.ellipse.a;
    sample.ellipse.theta = pi * canonical(rng);
    const double radius = std::max(sample.ellipse.a, sample.ellipse.b);
    const double lo = radius + 1.0;
    const double hi = s - 2.0 - radius;
    if (hi <= lo) throw NumericError("synth_dataset: ellipse cannot fit, size too small");
    sample.ellipse.cx = lo + (hi - lo) * canonical(rng);
    sample.ellipse.cy = lo + (hi - lo) * canonical(rng);

    // Background and foreground base colors, well separated in brightness.
    double bg[3], fg[3];
    for (double& c : bg) c = 0.10 + 0.30 * canonical(rng);
    for (double& c : fg) c = 0.55 + 0.30 * canonical(rng);
    const double grad = 0.08 * (canonical(rng) - 0.5);

    sample.image.width = size;
    sample.image.height = size;
    sample.image.channels = 3;
    sample.image.pixels.resize(sample.image.expected_size());
    sample.mask.width = size;
    sample.mask.height = size;
    sample.mask.channels = 1;
    sample.mask.pixels.resize(sample.mask.expected_size());

    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const bool inside = ellipse_contains(sample.ellipse, static_cast<double>(x), static_cast<double>(y));
        const std::size_t idx = (static_cast<std::size_t>(y) * static_cast<std::size_t>(size) +
                                 static_cast<std::size_t>(x));
        sample.mask.pixels[idx] = inside ? 255 : 0;
        for (int c = 0; c < 3; ++c) {
          const double base = inside ? fg[c] : bg[c];
          const double noise = 0.06 * (canonical(rng) - 0.5);
          double v = base + noise + grad * (static_cast<double>(x) / s - 0.5);
          v = std::min(1.0, std::max(0.0, v));
          sample.image.pixels[idx * 3 + static_cast<std::size_t>(c)] =
              static_cast<std::uint8_t>(std::lround(v * 255.0));
        }
      }
    }
    out.push_back(std::move(sample));
  }
  return out;
}

void write_synth_dataset(const std::string& out_root, int n, int size, std::uint64_t seed) {
  const fs::path image_dir = fs::path(out_root) / "synthetic" / "image";
  const fs::path label_dir = fs::path(out_root) / "synthetic" / "label";
  std::error_code ec;
  fs::create_directories(image_dir, ec);
  fs::create_directories(label_dir, ec);
  if (!fs::is_directory(image_dir) || !fs::is_directory(label_dir)) {
    throw IoError("cannot create synthetic dataset directories under " + out_root);
  }

  const auto samples = synth_dataset(n, size, seed);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "synthetic_%04zu.png", i);
    write_png((image_dir / name).string(), samples[i].image);
    write_png((label_dir / name).string(), samples[i].mask);
  }
}

}  // namespace speednet
