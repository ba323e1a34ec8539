#include "vle2/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace vle2 {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload is little-endian; big-endian hosts unsupported");

uint32_t crc32(const uint8_t* data, size_t len, uint32_t seed) {
  static const auto table = [] {
    std::array<uint32_t, 256> t{};
    for (uint32_t i = 0; i < 256; ++i) {
      uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  uint32_t c = seed ^ 0xFFFFFFFFu;
  for (size_t i = 0; i < len; ++i) c = table[(c ^ data[i]) & 0xFF] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

const LoadedTensor& LoadedCheckpoint::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t;
  throw std::runtime_error("checkpoint: tensor '" + name + "' not found");
}

namespace {

template <class T>
void write_pod(std::ofstream& f, T v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <class T>
T read_pod(std::ifstream& f, const char* what) {
  T v{};
  f.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!f) throw std::runtime_error(std::string("checkpoint: truncated while reading ") + what);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const nlohmann::json& meta,
                     const std::vector<std::pair<std::string, const Tensor*>>& tensors) {
  nlohmann::json full = meta;
  nlohmann::json dir = nlohmann::json::array();
  uint64_t offset = 0;
  for (const auto& [name, t] : tensors) {
    nlohmann::json e;
    e["name"] = name;
    e["shape"] = t->shape;
    e["offset"] = offset;
    dir.push_back(e);
    offset += t->numel() * sizeof(float);
  }
  full["tensors"] = dir;
  const std::string meta_str = full.dump();

  std::vector<uint8_t> payload(offset);
  uint64_t off = 0;
  for (const auto& [name, t] : tensors) {
    std::memcpy(payload.data() + off, t->data.data(), t->numel() * sizeof(float));
    off += t->numel() * sizeof(float);
  }
  const uint32_t crc = crc32(payload.data(), payload.size());

  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("save_checkpoint: cannot open " + tmp);
    f.write("VLE2", 4);
    write_pod<uint32_t>(f, kCheckpointVersion);
    write_pod<uint32_t>(f, static_cast<uint32_t>(meta_str.size()));
    write_pod<uint32_t>(f, crc);
    write_pod<uint64_t>(f, payload.size());
    f.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
    f.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size()));
    if (!f) throw std::runtime_error("save_checkpoint: write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "VLE2", 4) != 0)
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  const uint32_t version = read_pod<uint32_t>(f, "version");
  if (version != kCheckpointVersion)
    throw std::runtime_error("load_checkpoint: format version " + std::to_string(version) +
                             " unsupported (expected " + std::to_string(kCheckpointVersion) +
                             "); no silent migration");
  const uint32_t meta_len = read_pod<uint32_t>(f, "metadata length");
  const uint32_t crc_expected = read_pod<uint32_t>(f, "checksum");
  const uint64_t payload_len = read_pod<uint64_t>(f, "payload length");

  std::string meta_str(meta_len, '\0');
  f.read(meta_str.data(), meta_len);
  if (!f) throw std::runtime_error("load_checkpoint: truncated metadata");
  std::vector<uint8_t> payload(payload_len);
  f.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload_len));
  if (!f || static_cast<uint64_t>(f.gcount()) != payload_len)
    throw std::runtime_error("load_checkpoint: truncated payload (expected " +
                             std::to_string(payload_len) + " bytes)");
  const uint32_t crc_actual = crc32(payload.data(), payload.size());
  if (crc_actual != crc_expected)
    throw std::runtime_error("load_checkpoint: payload checksum mismatch");

  LoadedCheckpoint out;
  out.meta = nlohmann::json::parse(meta_str);
  if (!out.meta.contains("tensors"))
    throw std::runtime_error("load_checkpoint: metadata has no tensor directory");
  for (const auto& e : out.meta.at("tensors")) {
    LoadedTensor t;
    t.name = e.at("name").get<std::string>();
    t.shape = e.at("shape").get<std::vector<int>>();
    const uint64_t offset = e.at("offset").get<uint64_t>();
    size_t numel = 1;
    for (int dd : t.shape) numel *= static_cast<size_t>(dd);
    if (offset + numel * sizeof(float) > payload_len)
      throw std::runtime_error("load_checkpoint: tensor '" + t.name +
                               "' overruns payload at offset " + std::to_string(offset));
    t.data.resize(numel);
    std::memcpy(t.data.data(), payload.data() + offset, numel * sizeof(float));
    out.tensors.push_back(std::move(t));
  }
  return out;
}

}  // namespace vle2
