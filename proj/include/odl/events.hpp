#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace odl {

// One timestamped interaction: the unit of both training and evaluation.
struct Event {
  std::int64_t timestamp = 0;  // seconds since epoch
  std::string user_id;
  std::string item_id;
  std::vector<float> context;
  int label = 0;  // 0 or 1
};

using EventStream = std::vector<Event>;

constexpr std::int64_t kSecondsPerDay = 86400;

// Calendar day of a timestamp (floor division, correct for negatives too).
inline std::int64_t day_of(std::int64_t timestamp) {
  std::int64_t d = timestamp / kSecondsPerDay;
  if (timestamp % kSecondsPerDay < 0) --d;
  return d;
}

// Event-log file format: UTF-8, one JSON object per line with keys
// ts (integer), user (string), item (string), ctx (array of numbers),
// label (0|1), in timestamp order. The contract for all CLI commands.
void write_events(const EventStream& events, std::ostream& out);
void write_events(const EventStream& events, const std::filesystem::path& path);

// Lossless inverse of write_events. A malformed line raises DataError naming
// the 1-based line number; an empty file yields an empty stream.
EventStream read_events(std::istream& in, std::string_view origin = "<stream>");
EventStream read_events(const std::filesystem::path& path);

}  // namespace odl
