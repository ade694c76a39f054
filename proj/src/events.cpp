#include "odl/events.hpp"

#include <fstream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "odl/errors.hpp"

namespace odl {

namespace {

using ordered_json = nlohmann::ordered_json;

[[noreturn]] void line_error(std::string_view origin, std::size_t line, const std::string& what) {
  throw DataError(std::string(origin) + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

void write_events(const EventStream& events, std::ostream& out) {
  for (const Event& event : events) {
    ordered_json row;
    row["ts"] = event.timestamp;
    row["user"] = event.user_id;
    row["item"] = event.item_id;
    row["ctx"] = event.context;
    row["label"] = event.label;
    out << row.dump() << '\n';
  }
  if (!out) {
    throw IoError("write_events: stream write failed");
  }
}

void write_events(const EventStream& events, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("write_events: cannot open '" + path.string() + "' for writing");
  }
  write_events(events, out);
  out.flush();
  if (!out) {
    throw IoError("write_events: write to '" + path.string() + "' failed");
  }
}

EventStream read_events(std::istream& in, std::string_view origin) {
  EventStream events;
  std::string line;
  std::size_t line_number = 0;
  std::int64_t previous_ts = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) {
      line_error(origin, line_number, "empty line");
    }
    ordered_json row = ordered_json::parse(line, nullptr, false);
    if (row.is_discarded()) {
      line_error(origin, line_number, "invalid JSON");
    }
    for (const char* key : {"ts", "user", "item", "ctx", "label"}) {
      if (!row.contains(key)) {
        line_error(origin, line_number, std::string("missing field '") + key + "'");
      }
    }
    Event event;
    if (!row["ts"].is_number_integer()) {
      line_error(origin, line_number, "'ts' must be an integer");
    }
    event.timestamp = row["ts"].get<std::int64_t>();
    if (!row["user"].is_string() || row["user"].get_ref<const std::string&>().empty()) {
      line_error(origin, line_number, "'user' must be a non-empty string");
    }
    event.user_id = row["user"].get<std::string>();
    if (!row["item"].is_string() || row["item"].get_ref<const std::string&>().empty()) {
      line_error(origin, line_number, "'item' must be a non-empty string");
    }
    event.item_id = row["item"].get<std::string>();
    if (!row["ctx"].is_array()) {
      line_error(origin, line_number, "'ctx' must be an array of numbers");
    }
    event.context.reserve(row["ctx"].size());
    for (const auto& value : row["ctx"]) {
      if (!value.is_number()) {
        line_error(origin, line_number, "'ctx' must contain only numbers");
      }
      event.context.push_back(value.get<float>());
    }
    if (!row["label"].is_number_integer()) {
      line_error(origin, line_number, "'label' must be 0 or 1");
    }
    const auto label = row["label"].get<std::int64_t>();
    if (label != 0 && label != 1) {
      line_error(origin, line_number, "'label' must be 0 or 1, got " + std::to_string(label));
    }
    event.label = static_cast<int>(label);
    if (!events.empty() && event.timestamp < previous_ts) {
      line_error(origin, line_number, "timestamps must be non-decreasing");
    }
    previous_ts = event.timestamp;
    events.push_back(std::move(event));
  }
  return events;
}

EventStream read_events(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("read_events: cannot open '" + path.string() + "'");
  }
  return read_events(in, path.string());
}

}  // namespace odl
