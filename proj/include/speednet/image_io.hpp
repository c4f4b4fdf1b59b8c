#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace speednet {

// 8-bit interleaved image, 1 (gray) or 3 (RGB) channels.
struct ImageU8 {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;

  std::size_t expected_size() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * static_cast<std::size_t>(channels);
  }
};

// Reads PNG (any 8/16-bit color type, normalized to gray or RGB) or binary
// PGM/PPM, dispatching on the file magic. Throws IoError with the path.
ImageU8 read_image(const std::string& path);

// 8-bit non-interlaced PNG. channels must be 1 or 3.
void write_png(const std::string& path, const ImageU8& img);

// Binary P5 (gray) / P6 (RGB), for decoder-independent fixtures.
void write_pnm(const std::string& path, const ImageU8& img);

}  // namespace speednet
