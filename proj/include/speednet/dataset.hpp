#pragma once

#include <string>
#include <utility>
#include <vector>

#include "speednet/tensor.hpp"

namespace speednet {

struct Sample {
  std::string image_path;
  std::string mask_path;
  std::string class_name;
};

// Result of scanning an EBHI-Seg-layout tree:
//   root/<class>/image/*.png
//   root/<class>/label/*.png
// pairing image and label by filename.
struct DatasetIndex {
  std::vector<std::pair<std::string, std::vector<Sample>>> classes;  // sorted by class name
  std::vector<std::string> dropped;   // image files with no matching label
  std::vector<std::string> warnings;  // empty classes, unmatched labels

  std::size_t usable() const {
    std::size_t n = 0;
    for (const auto& [name, samples] : classes) n += samples.size();
    return n;
  }
};

DatasetIndex scan_dataset(const std::string& root);

// Lowercase, spaces/underscores to hyphens; used to match --class arguments
// against directory names.
std::string normalize_class_name(const std::string& name);

const std::vector<Sample>* find_class(const DatasetIndex& index, const std::string& name);

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

struct Split {
  std::vector<Sample> train;
  std::vector<Sample> test;
};

// Stratified: per class, seeded shuffle then floor(train_fraction * n) into
// train, the rest into test. Disjoint and exhaustive by construction.
Split split_dataset(const DatasetIndex& index, const SplitSpec& spec);

// Decodes samples [start, start+count) into an image batch (b,3,S,S) scaled
// to [0,1] and a mask batch (b,1,S,S) binarized at > 0.
std::pair<Tensor4f, Tensor4f> load_batch(const std::vector<Sample>& samples, std::size_t start, std::size_t count,
                                         int img_size);

}  // namespace speednet
