#include "forge/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace forge {

uint64_t fnv1a64(const void* data, size_t n, uint64_t seed) {
  const auto* p = static_cast<const uint8_t*>(data);
  uint64_t h = seed;
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

uint64_t fnv1a64(const std::string& s, uint64_t seed) {
  return fnv1a64(s.data(), s.size(), seed);
}

namespace {

constexpr char kMagic[8] = {'S', 'V', 'F', 'C', 'K', 'P', 'T', '\0'};

template <typename V>
void append_pod(std::string& buf, const V& v) {
  buf.append(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V take_pod(const std::string& buf, size_t& off) {
  if (off + sizeof(V) > buf.size()) throw std::runtime_error("checkpoint: truncated file");
  V v{};
  std::memcpy(&v, buf.data() + off, sizeof(V));
  off += sizeof(V);
  return v;
}

}  // namespace

void Checkpoint::put_floats(const std::string& name, const float* data, size_t count) {
  Entry e;
  e.name = name;
  e.dtype = Dtype::F32;
  e.payload.resize(count * sizeof(float));
  std::memcpy(e.payload.data(), data, e.payload.size());
  entries_.push_back(std::move(e));
}

void Checkpoint::put_bytes(const std::string& name, const std::string& bytes) {
  Entry e;
  e.name = name;
  e.dtype = Dtype::Bytes;
  e.payload.assign(bytes.begin(), bytes.end());
  entries_.push_back(std::move(e));
}

void Checkpoint::put_u64(const std::string& name, uint64_t value) {
  Entry e;
  e.name = name;
  e.dtype = Dtype::U64;
  e.payload.resize(sizeof(uint64_t));
  std::memcpy(e.payload.data(), &value, sizeof(uint64_t));
  entries_.push_back(std::move(e));
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return true;
  return false;
}

const Checkpoint::Entry& Checkpoint::find(const std::string& name, Dtype dtype) const {
  for (const auto& e : entries_) {
    if (e.name == name) {
      if (e.dtype != dtype) throw std::runtime_error("checkpoint: entry '" + name + "' has wrong type");
      return e;
    }
  }
  throw std::runtime_error("checkpoint: missing entry '" + name + "'");
}

void Checkpoint::get_floats(const std::string& name, float* out, size_t count) const {
  const Entry& e = find(name, Dtype::F32);
  if (e.payload.size() != count * sizeof(float))
    throw std::runtime_error("checkpoint: entry '" + name + "' holds " +
                             std::to_string(e.payload.size() / sizeof(float)) +
                             " floats, expected " + std::to_string(count));
  std::memcpy(out, e.payload.data(), e.payload.size());
}

size_t Checkpoint::float_count(const std::string& name) const {
  return find(name, Dtype::F32).payload.size() / sizeof(float);
}

std::string Checkpoint::get_bytes(const std::string& name) const {
  const Entry& e = find(name, Dtype::Bytes);
  return std::string(e.payload.begin(), e.payload.end());
}

uint64_t Checkpoint::get_u64(const std::string& name) const {
  const Entry& e = find(name, Dtype::U64);
  uint64_t v = 0;
  std::memcpy(&v, e.payload.data(), sizeof(uint64_t));
  return v;
}

void Checkpoint::save(const std::string& path) const {
  std::string buf;
  buf.append(kMagic, sizeof(kMagic));
  append_pod(buf, kVersion);
  append_pod(buf, fingerprint);
  append_pod(buf, static_cast<uint32_t>(entries_.size()));
  for (const auto& e : entries_) {
    append_pod(buf, static_cast<uint16_t>(e.name.size()));
    buf.append(e.name);
    append_pod(buf, static_cast<uint8_t>(e.dtype));
    append_pod(buf, static_cast<uint64_t>(e.payload.size()));
    buf.append(reinterpret_cast<const char*>(e.payload.data()), e.payload.size());
  }
  append_pod(buf, fnv1a64(buf.data(), buf.size()));

  const std::filesystem::path target(path);
  const std::filesystem::path tmp = target.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("checkpoint: cannot write " + tmp.string());
    os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    os.flush();
    if (!os) throw std::runtime_error("checkpoint: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  const std::string buf = ss.str();

  if (buf.size() < sizeof(kMagic) + sizeof(uint32_t) + sizeof(uint64_t) * 2)
    throw std::runtime_error("checkpoint: truncated file");
  const size_t body_len = buf.size() - sizeof(uint64_t);
  uint64_t stored_sum = 0;
  std::memcpy(&stored_sum, buf.data() + body_len, sizeof(uint64_t));
  if (stored_sum != fnv1a64(buf.data(), body_len))
    throw std::runtime_error("checkpoint: checksum mismatch (corrupt file)");

  size_t off = 0;
  if (std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: bad magic");
  off += sizeof(kMagic);
  const auto version = take_pod<uint32_t>(buf, off);
  if (version != kVersion)
    throw std::runtime_error("checkpoint: file version " + std::to_string(version) +
                             " does not match supported version " + std::to_string(kVersion));
  Checkpoint c;
  c.fingerprint = take_pod<uint64_t>(buf, off);
  const auto n = take_pod<uint32_t>(buf, off);
  for (uint32_t i = 0; i < n; ++i) {
    Entry e;
    const auto name_len = take_pod<uint16_t>(buf, off);
    if (off + name_len > body_len) throw std::runtime_error("checkpoint: truncated file");
    e.name.assign(buf.data() + off, name_len);
    off += name_len;
    e.dtype = static_cast<Dtype>(take_pod<uint8_t>(buf, off));
    const auto payload_len = take_pod<uint64_t>(buf, off);
    if (off + payload_len > body_len) throw std::runtime_error("checkpoint: truncated file");
    e.payload.assign(buf.begin() + static_cast<long>(off),
                     buf.begin() + static_cast<long>(off + payload_len));
    off += payload_len;
    c.entries_.push_back(std::move(e));
  }
  if (off != body_len) throw std::runtime_error("checkpoint: trailing bytes");
  return c;
}

}  // namespace forge
