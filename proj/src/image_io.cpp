#include "speednet/image_io.hpp"

#include <png.h>

#include <cctype>
#include <cstdio>
#include <cstring>
#include <memory>

#include "speednet/errors.hpp"

namespace speednet {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
  (void)png;
  throw IoError(std::string("libpng: ") + msg);
}

void png_warning_fn(png_structp, png_const_charp) {}

ImageU8 read_png_file(const std::string& path, std::FILE* f) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warning_fn);
  if (!png) throw IoError(path + ": png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError(path + ": png_create_info_struct failed");
  }

  ImageU8 img;
  try {
    png_init_io(png, f);
    png_read_info(png, info);

    png_uint_32 width = 0, height = 0;
    int bit_depth = 0, color_type = 0;
    png_get_IHDR(png, info, &width, &height, &bit_depth, &color_type, nullptr, nullptr, nullptr);

    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const int channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) throw IoError(path + ": unsupported channel count after decode");

    img.width = static_cast<int>(width);
    img.height = static_cast<int>(height);
    img.channels = channels;
    img.pixels.resize(img.expected_size());

    std::vector<png_bytep> rows(height);
    const std::size_t stride = static_cast<std::size_t>(width) * static_cast<std::size_t>(channels);
    for (png_uint_32 y = 0; y < height; ++y) rows[y] = img.pixels.data() + y * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

int pnm_read_value(std::FILE* f, const std::string& path) {
  int c = std::fgetc(f);
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = std::fgetc(f);
    } else if (std::isspace(c)) {
      c = std::fgetc(f);
    } else {
      break;
    }
  }
  if (c == EOF || !std::isdigit(c)) throw IoError(path + ": malformed PNM header");
  int value = 0;
  while (c != EOF && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    c = std::fgetc(f);
  }
  return value;
}

ImageU8 read_pnm_file(const std::string& path, std::FILE* f, int channels) {
  ImageU8 img;
  img.width = pnm_read_value(f, path);
  img.height = pnm_read_value(f, path);
  const int maxval = pnm_read_value(f, path);
  if (img.width < 1 || img.height < 1 || maxval != 255) {
    throw IoError(path + ": unsupported PNM geometry or maxval");
  }
  img.channels = channels;
  img.pixels.resize(img.expected_size());
  if (std::fread(img.pixels.data(), 1, img.pixels.size(), f) != img.pixels.size()) {
    throw IoError(path + ": truncated PNM payload");
  }
  return img;
}

}  // namespace

ImageU8 read_image(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoError(path + ": cannot open for reading");

  unsigned char magic[8] = {};
  const std::size_t got = std::fread(magic, 1, sizeof(magic), f.get());
  if (got < 2) throw IoError(path + ": file too short");
  std::rewind(f.get());

  if (got >= 8 && png_sig_cmp(magic, 0, 8) == 0) return read_png_file(path, f.get());
  if (magic[0] == 'P' && magic[1] == '5') {
    std::fseek(f.get(), 2, SEEK_SET);
    return read_pnm_file(path, f.get(), 1);
  }
  if (magic[0] == 'P' && magic[1] == '6') {
    std::fseek(f.get(), 2, SEEK_SET);
    return read_pnm_file(path, f.get(), 3);
  }
  throw IoError(path + ": unrecognized image format (expected PNG, PGM, or PPM)");
}

void write_png(const std::string& path, const ImageU8& img) {
  if (img.channels != 1 && img.channels != 3) throw IoError(path + ": write_png supports 1 or 3 channels");
  if (img.pixels.size() != img.expected_size()) throw IoError(path + ": pixel buffer size mismatch");

  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError(path + ": cannot open for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warning_fn);
  if (!png) throw IoError(path + ": png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError(path + ": png_create_info_struct failed");
  }

  try {
    png_init_io(png, f.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
                 img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t stride = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.channels);
    for (int y = 0; y < img.height; ++y) {
      png_write_row(png, const_cast<png_bytep>(img.pixels.data() + static_cast<std::size_t>(y) * stride));
    }
    png_write_end(png, info);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
}

void write_pnm(const std::string& path, const ImageU8& img) {
  if (img.channels != 1 && img.channels != 3) throw IoError(path + ": write_pnm supports 1 or 3 channels");
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError(path + ": cannot open for writing");
  std::string header = (img.channels == 1 ? std::string("P5") : std::string("P6")) + "\n" +
                       std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  if (std::fwrite(header.data(), 1, header.size(), f.get()) != header.size() ||
      std::fwrite(img.pixels.data(), 1, img.pixels.size(), f.get()) != img.pixels.size()) {
    throw IoError(path + ": short write");
  }
}

}  // namespace speednet
