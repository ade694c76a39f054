#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace odl {

// Seeded 64-bit hash used for every id lookup. This is XXH64 exactly as
// published; reference test vectors are frozen in tests/test_hashing.cpp so
// the function can never drift silently (checkpoints depend on it).
std::uint64_t xxh64(const void* data, std::size_t len, std::uint64_t seed);

inline std::uint64_t xxh64(std::string_view text, std::uint64_t seed) {
  return xxh64(text.data(), text.size(), seed);
}

enum class HashMode : std::uint8_t { kSingle = 0, kDouble = 1 };

// Bucketing scheme for one id space (users or items).
struct HashConfig {
  std::uint64_t buckets = 1;
  HashMode mode = HashMode::kSingle;
  std::uint64_t seed_a = 0;
  std::uint64_t seed_b = 1;  // used in double mode only; must differ from seed_a

  void validate() const;  // throws ConfigError

  // Rows of embedding table backing this config (2x in double mode).
  std::uint64_t table_count() const { return mode == HashMode::kDouble ? 2 : 1; }
};

// Table memory needed for one id space: buckets * dim floats per table,
// doubled in double mode.
std::uint64_t table_memory_bytes(const HashConfig& config, std::uint32_t dim);

struct HashedIndex {
  std::uint64_t primary_row = 0;
  std::optional<std::uint64_t> secondary_row;  // present iff double mode
};

// Deterministic id -> row(s) mapping. Throws DataError on an empty id.
HashedIndex hash_id(const HashConfig& config, std::string_view id);

struct CollisionReport {
  std::uint64_t num_ids = 0;
  std::uint64_t buckets = 0;
  HashMode mode = HashMode::kSingle;
  double collision_rate = 0.0;  // fraction of ids sharing their full index with another id
  double expected_rate = 0.0;   // analytic 1-(1-1/B)^(N-1), B^2 in double mode
};

double expected_collision_rate(std::uint64_t buckets, HashMode mode, std::uint64_t num_ids);

// Empirical + analytic collision rate over a set of distinct ids.
CollisionReport measure_collisions(const HashConfig& config, std::span<const std::string> ids);

// One report per bucket count, in input order. bucket_list must be strictly
// increasing.
std::vector<CollisionReport> collision_sweep(const HashConfig& base,
                                             std::span<const std::string> ids,
                                             std::span<const std::uint64_t> bucket_list);

const char* hash_mode_name(HashMode mode);

}  // namespace odl
