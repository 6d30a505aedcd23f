#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pino/tensor.hpp"

namespace pino {

static_assert(std::endian::native == std::endian::little,
              "binary payloads are little-endian; big-endian hosts are unsupported");

// Little-endian binary payload helpers with a FNV-1a trailer for corruption
// detection.  All numeric payloads are 64-bit floats with explicit lengths.

inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

struct PayloadWriter {
  std::string bytes;

  template <typename T>
  void raw(T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    bytes.append(buf, sizeof(T));
  }
  void u8(std::uint8_t v) { raw(v); }
  void u32(std::uint32_t v) { raw(v); }
  void u64(std::uint64_t v) { raw(v); }
  void f64(double v) { raw(v); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes.append(s);
  }
  void tensor(const Tensor& t) {
    u32(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape) u64(d);
    for (double v : t.data) f64(v);
  }
};

struct PayloadReader {
  const std::string* bytes;
  std::size_t at = 0;
  std::string context;

  void need(std::size_t n) const {
    if (at + n > bytes->size())
      throw std::runtime_error(context + ": truncated payload (needed " + std::to_string(n) +
                               " bytes at offset " + std::to_string(at) + ")");
  }
  template <typename T>
  T raw() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes->data() + at, sizeof(T));
    at += sizeof(T);
    return v;
  }
  std::uint8_t u8() { return raw<std::uint8_t>(); }
  std::uint32_t u32() { return raw<std::uint32_t>(); }
  std::uint64_t u64() { return raw<std::uint64_t>(); }
  double f64() { return raw<double>(); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(bytes->data() + at, n);
    at += n;
    return s;
  }
  Tensor tensor() {
    const std::uint32_t rank = u32();
    if (rank > 2) throw std::runtime_error(context + ": tensor rank " + std::to_string(rank));
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(static_cast<std::size_t>(u64()));
    Tensor t(shape);
    for (auto& v : t.data) v = f64();
    return t;
  }
};

/// Container framing: 16-byte magic, u32 version, u64 payload length,
/// payload, u64 FNV-1a of the payload.
inline void write_container(const std::filesystem::path& path, const char magic[16],
                            std::uint32_t version, const std::string& payload) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(magic, 16);
    PayloadWriter header;
    header.u32(version);
    header.u64(payload.size());
    out.write(header.bytes.data(), static_cast<std::streamsize>(header.bytes.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    PayloadWriter trailer;
    trailer.u64(fnv1a(payload));
    out.write(trailer.bytes.data(), static_cast<std::streamsize>(trailer.bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_container(const std::filesystem::path& path, const char magic[16],
                                  std::uint32_t expected_version) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (all.size() < 16 + 4 + 8 + 8 || std::memcmp(all.data(), magic, 16) != 0)
    throw std::runtime_error(path.string() + ": bad magic or truncated header");
  PayloadReader r{&all, 16, path.string()};
  const std::uint32_t version = r.u32();
  if (version != expected_version)
    throw std::runtime_error(path.string() + ": format version " + std::to_string(version) +
                             " (expected " + std::to_string(expected_version) + ")");
  const std::uint64_t len = r.u64();
  if (r.at + len + 8 != all.size())
    throw std::runtime_error(path.string() + ": truncated or oversized payload");
  std::string payload = all.substr(r.at, len);
  PayloadReader t{&all, r.at + len, path.string()};
  if (t.u64() != fnv1a(payload))
    throw std::runtime_error(path.string() + ": checksum mismatch (corrupt file)");
  return payload;
}

}  // namespace pino
