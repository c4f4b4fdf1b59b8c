#include "speednet/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstdio>
#include <cstring>
#include <memory>

#include "speednet/errors.hpp"

namespace speednet {

namespace {

constexpr char kMagic[4] = {'S', 'P', 'D', 'N'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kDtypeF32 = 0;

void put_u8(std::string& out, std::uint8_t v) { out.push_back(static_cast<char>(v)); }

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  const std::string& path;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw IoError(path + ": truncated checkpoint");
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf[pos++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return v;
  }
  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

std::string serialize_body(const CheckpointData& data) {
  std::string body;
  put_u64(body, data.config_text.size());
  body += data.config_text;
  put_u8(body, data.has_optimizer ? 1 : 0);
  put_u64(body, data.adam_step);
  put_u32(body, static_cast<std::uint32_t>(data.tensors.size()));
  for (const auto& nt : data.tensors) {
    put_u32(body, static_cast<std::uint32_t>(nt.name.size()));
    body += nt.name;
    put_u8(body, kDtypeF32);
    put_u64(body, static_cast<std::uint64_t>(nt.tensor.n));
    put_u64(body, static_cast<std::uint64_t>(nt.tensor.c));
    put_u64(body, static_cast<std::uint64_t>(nt.tensor.h));
    put_u64(body, static_cast<std::uint64_t>(nt.tensor.w));
    for (float v : nt.tensor.data) put_f32(body, v);
  }
  return body;
}

std::uint32_t body_crc(const std::string& body) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size())));
}

}  // namespace

void save_checkpoint(const std::string& path, const CheckpointData& data) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  const std::string body = serialize_body(data);
  out += body;
  put_u32(out, body_crc(body));

  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw IoError(path + ": cannot open for writing");
  const std::size_t written = std::fwrite(out.data(), 1, out.size(), f);
  std::fclose(f);
  if (written != out.size()) throw IoError(path + ": short write");
}

CheckpointData load_checkpoint(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw IoError(path + ": cannot open for reading");
  std::string buf;
  char chunk[1 << 16];
  std::size_t got;
  while ((got = std::fread(chunk, 1, sizeof(chunk), f)) > 0) buf.append(chunk, got);
  std::fclose(f);

  if (buf.size() < 12) throw BadMagicError(path + ": file too short for a checkpoint");
  if (std::memcmp(buf.data(), kMagic, 4) != 0) throw BadMagicError(path + ": bad checkpoint magic");

  Reader r{buf, 4, path};
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw VersionError(path + ": checkpoint version " + std::to_string(version) + ", expected " +
                       std::to_string(kVersion));
  }

  const std::string body = buf.substr(8, buf.size() - 12);
  std::uint32_t stored_crc = 0;
  std::memcpy(&stored_crc, buf.data() + buf.size() - 4, 4);
  if constexpr (std::endian::native == std::endian::big) {
    stored_crc = __builtin_bswap32(stored_crc);
  }
  if (body_crc(body) != stored_crc) throw CrcError(path + ": checkpoint CRC mismatch");

  Reader br{body, 0, path};
  CheckpointData data;
  data.version = version;
  const std::uint64_t cfg_len = br.u64();
  data.config_text = br.bytes(cfg_len);
  data.has_optimizer = br.u8() != 0;
  data.adam_step = br.u64();
  const std::uint32_t count = br.u32();
  data.tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor nt;
    const std::uint32_t name_len = br.u32();
    nt.name = br.bytes(name_len);
    const std::uint8_t dtype = br.u8();
    if (dtype != kDtypeF32) throw IoError(path + ": unsupported tensor dtype code " + std::to_string(dtype));
    const i64 n = static_cast<i64>(br.u64());
    const i64 c = static_cast<i64>(br.u64());
    const i64 h = static_cast<i64>(br.u64());
    const i64 w = static_cast<i64>(br.u64());
    nt.tensor = Tensor4f(n, c, h, w);
    for (auto& v : nt.tensor.data) v = br.f32();
    data.tensors.push_back(std::move(nt));
  }
  return data;
}

std::size_t checkpoint_size_bytes(const CheckpointData& data) {
  std::size_t size = 4 + 4 + 4;  // magic + version + trailing crc
  size += 8 + data.config_text.size();
  size += 1 + 8;
  size += 4;
  for (const auto& nt : data.tensors) {
    size += 4 + nt.name.size() + 1 + 4 * 8 + nt.tensor.data.size() * 4;
  }
  return size;
}

i64 checkpoint_scalar_count(const CheckpointData& data) {
  i64 n = 0;
  for (const auto& nt : data.tensors) n += nt.tensor.numel();
  return n;
}

}  // namespace speednet
