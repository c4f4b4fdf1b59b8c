#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "speednet/tensor.hpp"

namespace speednet {

struct NamedTensor {
  std::string name;
  Tensor4f tensor;
};

// On-disk layout (all integers little-endian):
//   magic "SPDN" | u32 version | body | u32 crc32(body)
// body:
//   u64 config length + bytes (the resolved run configuration, verbatim)
//   u8 has_optimizer | u64 adam_step
//   u32 tensor count, then per tensor:
//     u32 name length + bytes | u8 dtype code (0 = f32) | 4 x u64 dims | payload
// Serialization order is the visit order, so save -> load -> save is
// byte-identical.
struct CheckpointData {
  std::uint32_t version = 1;
  std::string config_text;
  std::vector<NamedTensor> tensors;
  bool has_optimizer = false;
  std::uint64_t adam_step = 0;
};

void save_checkpoint(const std::string& path, const CheckpointData& data);
CheckpointData load_checkpoint(const std::string& path);

// Exact size in bytes the checkpoint would serialize to.
std::size_t checkpoint_size_bytes(const CheckpointData& data);

// Total scalars stored in the tensor table.
i64 checkpoint_scalar_count(const CheckpointData& data);

}  // namespace speednet
