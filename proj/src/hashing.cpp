#include "odl/hashing.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <unordered_map>
#include <unordered_set>

#include "odl/errors.hpp"

namespace odl {

namespace {

constexpr std::uint64_t kPrime1 = 0x9E3779B185EBCA87ULL;
constexpr std::uint64_t kPrime2 = 0xC2B2AE3D27D4EB4FULL;
constexpr std::uint64_t kPrime3 = 0x165667B19E3779F9ULL;
constexpr std::uint64_t kPrime4 = 0x85EBCA77C2B2AE63ULL;
constexpr std::uint64_t kPrime5 = 0x27D4EB2F165667C5ULL;

inline std::uint64_t rotl64(std::uint64_t x, int r) {
  return (x << r) | (x >> (64 - r));
}

inline std::uint64_t read_u64le(const unsigned char* p) {
  std::uint64_t v;
  std::memcpy(&v, p, sizeof v);
  return v;  // little-endian hosts only; static_assert below
}

inline std::uint32_t read_u32le(const unsigned char* p) {
  std::uint32_t v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

static_assert(std::endian::native == std::endian::little,
              "xxh64 byte reads assume a little-endian host");

inline std::uint64_t xxh64_round(std::uint64_t acc, std::uint64_t input) {
  acc += input * kPrime2;
  acc = rotl64(acc, 31);
  acc *= kPrime1;
  return acc;
}

inline std::uint64_t xxh64_merge_round(std::uint64_t acc, std::uint64_t val) {
  acc ^= xxh64_round(0, val);
  acc = acc * kPrime1 + kPrime4;
  return acc;
}

}  // namespace

std::uint64_t xxh64(const void* data, std::size_t len, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  const unsigned char* const end = p + len;
  std::uint64_t h;

  if (len >= 32) {
    std::uint64_t v1 = seed + kPrime1 + kPrime2;
    std::uint64_t v2 = seed + kPrime2;
    std::uint64_t v3 = seed;
    std::uint64_t v4 = seed - kPrime1;
    const unsigned char* const limit = end - 32;
    do {
      v1 = xxh64_round(v1, read_u64le(p));
      v2 = xxh64_round(v2, read_u64le(p + 8));
      v3 = xxh64_round(v3, read_u64le(p + 16));
      v4 = xxh64_round(v4, read_u64le(p + 24));
      p += 32;
    } while (p <= limit);
    h = rotl64(v1, 1) + rotl64(v2, 7) + rotl64(v3, 12) + rotl64(v4, 18);
    h = xxh64_merge_round(h, v1);
    h = xxh64_merge_round(h, v2);
    h = xxh64_merge_round(h, v3);
    h = xxh64_merge_round(h, v4);
  } else {
    h = seed + kPrime5;
  }

  h += static_cast<std::uint64_t>(len);

  while (p + 8 <= end) {
    h ^= xxh64_round(0, read_u64le(p));
    h = rotl64(h, 27) * kPrime1 + kPrime4;
    p += 8;
  }
  if (p + 4 <= end) {
    h ^= static_cast<std::uint64_t>(read_u32le(p)) * kPrime1;
    h = rotl64(h, 23) * kPrime2 + kPrime3;
    p += 4;
  }
  while (p < end) {
    h ^= static_cast<std::uint64_t>(*p) * kPrime5;
    h = rotl64(h, 11) * kPrime1;
    ++p;
  }

  h ^= h >> 33;
  h *= kPrime2;
  h ^= h >> 29;
  h *= kPrime3;
  h ^= h >> 32;
  return h;
}

void HashConfig::validate() const {
  if (buckets < 1) {
    throw ConfigError("hash config: buckets must be >= 1");
  }
  if (mode == HashMode::kDouble && seed_a == seed_b) {
    throw ConfigError("hash config: double mode requires seed_a != seed_b");
  }
}

std::uint64_t table_memory_bytes(const HashConfig& config, std::uint32_t dim) {
  return config.table_count() * config.buckets * dim * sizeof(float);
}

HashedIndex hash_id(const HashConfig& config, std::string_view id) {
  if (id.empty()) {
    throw DataError("hash_id: empty id");
  }
  HashedIndex index;
  index.primary_row = xxh64(id, config.seed_a) % config.buckets;
  if (config.mode == HashMode::kDouble) {
    index.secondary_row = xxh64(id, config.seed_b) % config.buckets;
  }
  return index;
}

double expected_collision_rate(std::uint64_t buckets, HashMode mode, std::uint64_t num_ids) {
  if (num_ids <= 1) return 0.0;
  const double b = static_cast<double>(buckets);
  // P(id collides) = 1 - (1 - 1/S)^(N-1) with S the effective index space:
  // B for a single hash, B^2 for the pair (both rows must match).
  const double space = mode == HashMode::kDouble ? b * b : b;
  const double n_others = static_cast<double>(num_ids - 1);
  return -std::expm1(n_others * std::log1p(-1.0 / space));
}

CollisionReport measure_collisions(const HashConfig& config, std::span<const std::string> ids) {
  config.validate();
  if (ids.empty()) {
    throw DataError("measure_collisions: empty id set");
  }
  {
    std::unordered_set<std::string_view> seen;
    seen.reserve(ids.size());
    for (const auto& id : ids) {
      if (!seen.insert(id).second) {
        throw DataError("measure_collisions: duplicate id '" + id + "'");
      }
    }
  }

  // Count occupancy of each full index (row, or row pair packed into one key).
  std::unordered_map<std::uint64_t, std::uint32_t> occupancy;
  occupancy.reserve(ids.size() * 2);
  std::vector<std::uint64_t> keys;
  keys.reserve(ids.size());
  for (const auto& id : ids) {
    const HashedIndex index = hash_id(config, id);
    std::uint64_t key = index.primary_row;
    if (index.secondary_row) {
      key = key * config.buckets + *index.secondary_row;
    }
    keys.push_back(key);
    ++occupancy[key];
  }
  std::uint64_t collided = 0;
  for (const std::uint64_t key : keys) {
    if (occupancy[key] >= 2) ++collided;
  }

  CollisionReport report;
  report.num_ids = ids.size();
  report.buckets = config.buckets;
  report.mode = config.mode;
  report.collision_rate = static_cast<double>(collided) / static_cast<double>(ids.size());
  report.expected_rate = expected_collision_rate(config.buckets, config.mode, ids.size());
  return report;
}

std::vector<CollisionReport> collision_sweep(const HashConfig& base,
                                             std::span<const std::string> ids,
                                             std::span<const std::uint64_t> bucket_list) {
  for (std::size_t i = 1; i < bucket_list.size(); ++i) {
    if (bucket_list[i] <= bucket_list[i - 1]) {
      throw ConfigError("collision_sweep: bucket list must be strictly increasing");
    }
  }
  std::vector<CollisionReport> reports;
  reports.reserve(bucket_list.size());
  for (const std::uint64_t buckets : bucket_list) {
    HashConfig config = base;
    config.buckets = buckets;
    reports.push_back(measure_collisions(config, ids));
  }
  return reports;
}

const char* hash_mode_name(HashMode mode) {
  return mode == HashMode::kDouble ? "double" : "single";
}

}  // namespace odl
