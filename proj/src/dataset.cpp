#include "speednet/dataset.hpp"

#include <algorithm>
#include <filesystem>

#include "speednet/errors.hpp"
#include "speednet/image_io.hpp"

namespace fs = std::filesystem;

namespace speednet {

namespace {

bool is_image_file(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".pgm" || ext == ".ppm";
}

std::vector<fs::path> list_images(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::string normalize_class_name(const std::string& name) {
  std::string out;
  out.reserve(name.size());
  for (unsigned char c : name) {
    if (c == ' ' || c == '_') {
      out.push_back('-');
    } else {
      out.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  return out;
}

DatasetIndex scan_dataset(const std::string& root) {
  const fs::path root_path(root);
  if (!fs::exists(root_path) || !fs::is_directory(root_path)) {
    throw IoError("dataset root not found: " + root);
  }

  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(root_path)) {
    if (entry.is_directory()) class_dirs.push_back(entry.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty()) throw IoError("dataset root has no class directories: " + root);

  DatasetIndex index;
  for (const auto& class_dir : class_dirs) {
    const std::string class_name = class_dir.filename().string();
    const fs::path image_dir = class_dir / "image";
    const fs::path label_dir = class_dir / "label";
    if (!fs::is_directory(image_dir)) throw IoError("missing image directory: " + image_dir.string());
    if (!fs::is_directory(label_dir)) throw IoError("missing label directory: " + label_dir.string());

    std::vector<Sample> samples;
    std::size_t labels_seen = 0;
    const auto images = list_images(image_dir);
    for (const auto& img_path : images) {
      const fs::path label_path = label_dir / img_path.filename();
      if (fs::exists(label_path)) {
        samples.push_back(Sample{img_path.string(), label_path.string(), class_name});
      } else {
        index.dropped.push_back(img_path.string());
      }
    }
    for (const auto& label_path : list_images(label_dir)) {
      ++labels_seen;
      if (!fs::exists(image_dir / label_path.filename())) {
        index.warnings.push_back("label without image: " + label_path.string());
      }
    }
    if (samples.empty()) {
      index.warnings.push_back("class '" + class_name + "' has no usable image/label pairs");
    }
    (void)labels_seen;
    index.classes.emplace_back(class_name, std::move(samples));
  }
  return index;
}

const std::vector<Sample>* find_class(const DatasetIndex& index, const std::string& name) {
  const std::string want = normalize_class_name(name);
  for (const auto& [cls, samples] : index.classes) {
    if (normalize_class_name(cls) == want) return &samples;
  }
  return nullptr;
}

Split split_dataset(const DatasetIndex& index, const SplitSpec& spec) {
  if (spec.train_fraction < 0.0 || spec.train_fraction > 1.0) {
    throw ConfigError("train_fraction must lie in [0,1]");
  }
  Split split;
  std::mt19937_64 rng(spec.seed);
  for (const auto& [cls, samples] : index.classes) {
    std::vector<Sample> shuffled = samples;
    // Fisher-Yates with pinned draws, identical on every platform.
    for (i64 i = static_cast<i64>(shuffled.size()) - 1; i > 0; --i) {
      const i64 j = uniform_index(rng, i + 1);
      std::swap(shuffled[static_cast<std::size_t>(i)], shuffled[static_cast<std::size_t>(j)]);
    }
    const std::size_t n_train = static_cast<std::size_t>(spec.train_fraction * static_cast<double>(shuffled.size()));
    for (std::size_t i = 0; i < shuffled.size(); ++i) {
      (i < n_train ? split.train : split.test).push_back(std::move(shuffled[i]));
    }
  }
  return split;
}

std::pair<Tensor4f, Tensor4f> load_batch(const std::vector<Sample>& samples, std::size_t start, std::size_t count,
                                         int img_size) {
  if (count < 1 || start + count > samples.size()) {
    throw Error("load_batch: range [" + std::to_string(start) + ", " + std::to_string(start + count) +
                ") out of bounds for " + std::to_string(samples.size()) + " samples");
  }
  Tensor4f images(static_cast<i64>(count), 3, img_size, img_size);
  Tensor4f masks(static_cast<i64>(count), 1, img_size, img_size);
  for (std::size_t b = 0; b < count; ++b) {
    const Sample& s = samples[start + b];
    const ImageU8 img = read_image(s.image_path);
    if (img.width != img_size || img.height != img_size) {
      throw IoError(s.image_path + ": decoded size " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                    " does not match expected " + std::to_string(img_size));
    }
    const ImageU8 mask = read_image(s.mask_path);
    if (mask.width != img_size || mask.height != img_size) {
      throw IoError(s.mask_path + ": decoded size " + std::to_string(mask.width) + "x" +
                    std::to_string(mask.height) + " does not match expected " + std::to_string(img_size));
    }

    const i64 bi = static_cast<i64>(b);
    for (i64 y = 0; y < img_size; ++y) {
      for (i64 x = 0; x < img_size; ++x) {
        const std::size_t pix = (static_cast<std::size_t>(y) * static_cast<std::size_t>(img_size) +
                                 static_cast<std::size_t>(x)) *
                                static_cast<std::size_t>(img.channels);
        for (i64 c = 0; c < 3; ++c) {
          const std::uint8_t v = img.channels == 3 ? img.pixels[pix + static_cast<std::size_t>(c)] : img.pixels[pix];
          images(bi, c, y, x) = static_cast<float>(v) / 255.0f;
        }
        const std::size_t mpix = (static_cast<std::size_t>(y) * static_cast<std::size_t>(img_size) +
                                  static_cast<std::size_t>(x)) *
                                 static_cast<std::size_t>(mask.channels);
        bool any = false;
        for (int c = 0; c < mask.channels; ++c) any = any || mask.pixels[mpix + static_cast<std::size_t>(c)] > 0;
        masks(bi, 0, y, x) = any ? 1.0f : 0.0f;
      }
    }
  }
  return {std::move(images), std::move(masks)};
}

}  // namespace speednet
