#pragma once

#include <array>
#include <cstdint>
#include <filesystem>

#include "odl/model.hpp"

namespace odl {

// Fixed little-endian binary checkpoint. The 96-byte header fully determines
// the payload layout; a CRC-32 over the payload detects corruption. The exact
// byte layout is documented with a hex-annotated example in
// docs/checkpoint_format.md.
inline constexpr std::array<char, 4> kCheckpointMagic = {'O', 'D', 'L', 'C'};
inline constexpr std::uint16_t kCheckpointVersion = 1;
inline constexpr std::uint64_t kCheckpointHeaderBytes = 96;

// Expected on-disk size for a state with this configuration.
std::uint64_t checkpoint_file_bytes(const ModelConfig& config);

// Atomic write (temp file + rename). Throws NumericError if any parameter is
// non-finite, IoError on filesystem failure.
void save_checkpoint(const ModelState& state, const std::filesystem::path& path);

// Validates magic, version, size and checksum before reconstructing the
// state; each failure mode is reported distinctly (DataError), I/O failures
// as IoError.
ModelState load_checkpoint(const std::filesystem::path& path);

// Test utility: true iff training the stream uninterrupted and training with
// a save/load round trip after `split_day` days produce bit-identical final
// states. split_day is 1-based relative to the stream's first day.
bool resume_equivalence_check(const ModelConfig& config, const EventStream& events,
                              std::uint32_t split_day,
                              const std::filesystem::path& scratch_dir);

}  // namespace odl
