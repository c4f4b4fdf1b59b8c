#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "speednet/image_io.hpp"

namespace speednet {

struct Ellipse {
  double cx = 0, cy = 0;
  double a = 1, b = 1;  // semi-axes
  double theta = 0;     // rotation, radians
};

// Pixel-centre membership test; the exact equation the masks are drawn from.
bool ellipse_contains(const Ellipse& e, double x, double y);

struct SynthSample {
  ImageU8 image;  // RGB
  ImageU8 mask;   // gray, 0/255
  Ellipse ellipse;
};

// n images of one random ellipse (bright foreground) on a textured darker
// background with the exact mask. Foreground fraction is in [0.10, 0.30] of
// the frame by construction (the ellipse always fits fully inside).
// Deterministic for a given seed.
std::vector<SynthSample> synth_dataset(int n, int size, std::uint64_t seed);

// Writes synth_dataset output in dataset layout under out_root:
//   out_root/synthetic/image/synthetic_~.png
//   out_root/synthetic/label/synthetic_~.png
void write_synth_dataset(const std::string& out_root, int n, int size, std::uint64_t seed);

}  // namespace speednet
