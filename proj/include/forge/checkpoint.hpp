#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace forge {

uint64_t fnv1a64(const void* data, size_t n, uint64_t seed = 0xcbf29ce484222325ull);
uint64_t fnv1a64(const std::string& s, uint64_t seed = 0xcbf29ce484222325ull);

/// Versioned binary container of named arrays plus a config fingerprint.
/// Writes are atomic (temp file + rename) and loads verify a trailing
/// checksum, so an interrupted run can never leave a truncated checkpoint
/// behind. Format documented in docs/checkpoint.md.
class Checkpoint {
 public:
  static constexpr uint32_t kVersion = 1;

  enum class Dtype : uint8_t { F32 = 0, Bytes = 1, U64 = 2 };

  struct Entry {
    std::string name;
    Dtype dtype = Dtype::F32;
    std::vector<uint8_t> payload;
  };

  uint64_t fingerprint = 0;

  void put_floats(const std::string& name, const float* data, size_t count);
  void put_bytes(const std::string& name, const std::string& bytes);
  void put_u64(const std::string& name, uint64_t value);

  bool has(const std::string& name) const;
  /// Throws when the entry is missing or the count differs.
  void get_floats(const std::string& name, float* out, size_t count) const;
  size_t float_count(const std::string& name) const;
  std::string get_bytes(const std::string& name) const;
  uint64_t get_u64(const std::string& name) const;

  const std::vector<Entry>& entries() const { return entries_; }

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

 private:
  const Entry& find(const std::string& name, Dtype dtype) const;
  std::vector<Entry> entries_;
};

}  // namespace forge
