#include "odl/checkpoint.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "odl/errors.hpp"

namespace odl {

namespace {

// Header layout, all little-endian (see docs/checkpoint_format.md):
//   0  magic "ODLC"           4 bytes
//   4  version                u16
//   6  embedding_dim          u32
//  10  context_dim            u32
//  14  user hash mode         u8
//  15  item hash mode         u8
//  16  user buckets           u64
//  24  item buckets           u64
//  32  user seed_a            u64
//  40  user seed_b            u64
//  48  item seed_a            u64
//  56  item seed_b            u64
//  64  learning_rate          f32
//  68  l2_reg                 f32
//  72  init_scale             f32
//  76  model seed             u64
//  84  step_count             u64
//  92  payload CRC-32         u32
//  96  payload: bias, context_weights, user table(s), item table(s), all f32

class ByteWriter {
 public:
  explicit ByteWriter(std::string& buffer) : buffer_(buffer) {}

  void u8(std::uint8_t v) { buffer_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) { emit(v, 2); }
  void u32(std::uint32_t v) { emit(v, 4); }
  void u64(std::uint64_t v) { emit(v, 8); }
  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }

 private:
  // Little-endian byte order regardless of host.
  void emit(std::uint64_t v, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      buffer_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
  }
  std::string& buffer_;
};

class ByteReader {
 public:
  ByteReader(const std::string& buffer, std::size_t offset) : buffer_(buffer), offset_(offset) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(take(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(take(4)); }
  std::uint64_t u64() { return take(8); }
  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

 private:
  std::uint64_t take(std::size_t n) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buffer_[offset_ + i])) << (8 * i);
    }
    offset_ += n;
    return v;
  }
  const std::string& buffer_;
  std::size_t offset_;
};

std::uint64_t payload_floats(const ModelConfig& config) {
  return 1 + config.context_dim +
         (config.user_hash.table_count() * config.user_hash.buckets +
          config.item_hash.table_count() * config.item_hash.buckets) *
             config.embedding_dim;
}

void append_table_payload(ByteWriter& writer, const std::vector<EmbeddingTable>& tables) {
  for (const EmbeddingTable& table : tables) {
    for (const float value : table.values) {
      writer.f32(value);
    }
  }
}

std::uint32_t payload_crc(const std::string& payload) {
  return static_cast<std::uint32_t>(
      crc32_z(crc32_z(0UL, nullptr, 0), reinterpret_cast<const Bytef*>(payload.data()),
              payload.size()));
}

bool all_finite(const ModelState& state) {
  if (!std::isfinite(state.bias)) return false;
  for (const float v : state.context_weights) {
    if (!std::isfinite(v)) return false;
  }
  for (const auto* tables : {&state.user_tables, &state.item_tables}) {
    for (const EmbeddingTable& table : *tables) {
      for (const float v : table.values) {
        if (!std::isfinite(v)) return false;
      }
    }
  }
  return true;
}

}  // namespace

std::uint64_t checkpoint_file_bytes(const ModelConfig& config) {
  return kCheckpointHeaderBytes + 4 * payload_floats(config);
}

void save_checkpoint(const ModelState& state, const std::filesystem::path& path) {
  if (!all_finite(state)) {
    throw NumericError("save_checkpoint: state contains non-finite parameters");
  }

  std::string payload;
  payload.reserve(4 * payload_floats(state.config));
  {
    ByteWriter writer(payload);
    writer.f32(state.bias);
    for (const float v : state.context_weights) writer.f32(v);
    append_table_payload(writer, state.user_tables);
    append_table_payload(writer, state.item_tables);
  }

  std::string header;
  header.reserve(kCheckpointHeaderBytes);
  {
    ByteWriter writer(header);
    for (const char c : kCheckpointMagic) header.push_back(c);
    writer.u16(kCheckpointVersion);
    writer.u32(state.config.embedding_dim);
    writer.u32(state.config.context_dim);
    writer.u8(static_cast<std::uint8_t>(state.config.user_hash.mode));
    writer.u8(static_cast<std::uint8_t>(state.config.item_hash.mode));
    writer.u64(state.config.user_hash.buckets);
    writer.u64(state.config.item_hash.buckets);
    writer.u64(state.config.user_hash.seed_a);
    writer.u64(state.config.user_hash.seed_b);
    writer.u64(state.config.item_hash.seed_a);
    writer.u64(state.config.item_hash.seed_b);
    writer.f32(state.config.learning_rate);
    writer.f32(state.config.l2_reg);
    writer.f32(state.config.init_scale);
    writer.u64(state.config.seed);
    writer.u64(state.step_count);
    writer.u32(payload_crc(payload));
  }

  const std::filesystem::path temp = path.string() + ".tmp";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw IoError("save_checkpoint: cannot open '" + temp.string() + "' for writing");
    }
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(temp, ec);
      throw IoError("save_checkpoint: write to '" + temp.string() + "' failed");
    }
  }
  std::error_code ec;
  std::filesystem::rename(temp, path, ec);
  if (ec) {
    std::error_code ignored;
    std::filesystem::remove(temp, ignored);
    throw IoError("save_checkpoint: rename to '" + path.string() + "' failed: " + ec.message());
  }
}

ModelState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("load_checkpoint: cannot open '" + path.string() + "'");
  }
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) {
    throw IoError("load_checkpoint: read from '" + path.string() + "' failed");
  }
  if (bytes.size() < kCheckpointHeaderBytes) {
    throw DataError("load_checkpoint: truncated file (smaller than the header)");
  }
  if (std::memcmp(bytes.data(), kCheckpointMagic.data(), kCheckpointMagic.size()) != 0) {
    throw DataError("load_checkpoint: bad magic (not a checkpoint file)");
  }

  ByteReader reader(bytes, kCheckpointMagic.size());
  const std::uint16_t version = reader.u16();
  if (version != kCheckpointVersion) {
    throw DataError("load_checkpoint: unsupported version " + std::to_string(version));
  }

  ModelConfig config;
  config.embedding_dim = reader.u32();
  config.context_dim = reader.u32();
  const std::uint8_t user_mode = reader.u8();
  const std::uint8_t item_mode = reader.u8();
  if (user_mode > 1 || item_mode > 1) {
    throw DataError("load_checkpoint: invalid hash mode byte");
  }
  config.user_hash.mode = static_cast<HashMode>(user_mode);
  config.item_hash.mode = static_cast<HashMode>(item_mode);
  config.user_hash.buckets = reader.u64();
  config.item_hash.buckets = reader.u64();
  config.user_hash.seed_a = reader.u64();
  config.user_hash.seed_b = reader.u64();
  config.item_hash.seed_a = reader.u64();
  config.item_hash.seed_b = reader.u64();
  config.learning_rate = reader.f32();
  config.l2_reg = reader.f32();
  config.init_scale = reader.f32();
  config.seed = reader.u64();
  const std::uint64_t step_count = reader.u64();
  const std::uint32_t stored_crc = reader.u32();

  try {
    config.validate();
  } catch (const ConfigError& e) {
    throw DataError(std::string("load_checkpoint: inconsistent header: ") + e.what());
  }

  const std::uint64_t expected_size = checkpoint_file_bytes(config);
  if (bytes.size() < expected_size) {
    throw DataError("load_checkpoint: truncated file (" + std::to_string(bytes.size()) +
                    " bytes, expected " + std::to_string(expected_size) + ")");
  }
  if (bytes.size() > expected_size) {
    throw DataError("load_checkpoint: file size mismatch (" + std::to_string(bytes.size()) +
                    " bytes, expected " + std::to_string(expected_size) + ")");
  }

  const std::string payload = bytes.substr(kCheckpointHeaderBytes);
  if (payload_crc(payload) != stored_crc) {
    throw DataError("load_checkpoint: payload checksum mismatch");
  }

  ModelState state;
  state.config = config;
  state.step_count = step_count;
  ByteReader body(bytes, kCheckpointHeaderBytes);
  state.bias = body.f32();
  state.context_weights.resize(config.context_dim);
  for (float& v : state.context_weights) v = body.f32();
  const auto read_tables = [&](const HashConfig& hash) {
    std::vector<EmbeddingTable> tables(hash.table_count());
    for (EmbeddingTable& table : tables) {
      table.rows = hash.buckets;
      table.dim = config.embedding_dim;
      table.values.resize(table.rows * table.dim);
      for (float& v : table.values) v = body.f32();
    }
    return tables;
  };
  state.user_tables = read_tables(config.user_hash);
  state.item_tables = read_tables(config.item_hash);
  return state;
}

bool resume_equivalence_check(const ModelConfig& config, const EventStream& events,
                              std::uint32_t split_day,
                              const std::filesystem::path& scratch_dir) {
  config.validate();
  if (events.empty()) {
    throw DataError("resume_equivalence_check: empty stream");
  }
  const std::int64_t first_day = day_of(events.front().timestamp);
  const std::int64_t split_end = first_day + split_day;  // first day of the second half

  ModelState uninterrupted = init_model(config);
  for (const Event& event : events) {
    sgd_step(uninterrupted, event);
  }

  ModelState resumed = init_model(config);
  std::size_t i = 0;
  for (; i < events.size() && day_of(events[i].timestamp) < split_end; ++i) {
    sgd_step(resumed, events[i]);
  }
  const std::filesystem::path checkpoint_path = scratch_dir / "resume_check.odlc";
  save_checkpoint(resumed, checkpoint_path);
  ModelState reloaded = load_checkpoint(checkpoint_path);
  for (; i < events.size(); ++i) {
    sgd_step(reloaded, events[i]);
  }
  return states_bitwise_equal(uninterrupted, reloaded);
}

}  // namespace odl
