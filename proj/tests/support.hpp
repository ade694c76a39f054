#pragma once

// Shared helpers for the test binaries: scratch directories, tiny stream
// builders and the statistics used as independent oracles.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "odl/events.hpp"
#include "odl/model.hpp"

namespace odltest {

// Unique scratch directory under the system temp dir, removed on destruction.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("odl-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Uniform synthetic stream: `days` days with `per_day` events each, labels
// alternating, a tiny id pool. Enough structure for counting and determinism
// tests without the full generator.
inline odl::EventStream uniform_stream(std::uint32_t days, std::uint32_t per_day,
                                       std::uint32_t context_dim = 0,
                                       std::uint64_t seed = 7) {
  odl::EventStream events;
  events.reserve(static_cast<std::size_t>(days) * per_day);
  std::uint64_t state = seed;
  const auto next = [&state]() {
    state ^= state << 13;
    state ^= state >> 7;
    state ^= state << 17;
    return state;
  };
  for (std::uint32_t day = 0; day < days; ++day) {
    for (std::uint32_t e = 0; e < per_day; ++e) {
      odl::Event event;
      event.timestamp = static_cast<std::int64_t>(day) * odl::kSecondsPerDay +
                        (static_cast<std::int64_t>(e) * odl::kSecondsPerDay) / per_day;
      event.user_id = "u" + std::to_string(next() % 13);
      event.item_id = "i" + std::to_string(next() % 17);
      event.context.resize(context_dim);
      for (float& v : event.context) {
        v = static_cast<float>(static_cast<double>(next() % 2000) / 1000.0 - 1.0);
      }
      event.label = static_cast<int>(next() % 2);
      events.push_back(std::move(event));
    }
  }
  return events;
}

inline odl::ModelConfig small_model_config(std::uint32_t context_dim = 0,
                                           std::uint64_t seed = 42) {
  odl::ModelConfig config;
  config.embedding_dim = 4;
  config.learning_rate = 0.1f;
  config.l2_reg = 0.0f;
  config.context_dim = context_dim;
  config.init_scale = 0.05f;
  config.seed = seed;
  config.user_hash = {64, odl::HashMode::kSingle, 11, 12};
  config.item_hash = {64, odl::HashMode::kSingle, 21, 22};
  return config;
}

// OLS slope of y against x with the t statistic of the slope.
struct SlopeFit {
  double slope = 0.0;
  double t_statistic = 0.0;
};

inline SlopeFit fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mean_x = 0.0, mean_y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_x += x[i];
    mean_y += y[i];
  }
  mean_x /= static_cast<double>(n);
  mean_y /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mean_x) * (x[i] - mean_x);
    sxy += (x[i] - mean_x) * (y[i] - mean_y);
  }
  const double slope = sxy / sxx;
  const double intercept = mean_y - slope * mean_x;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (intercept + slope * x[i]);
    sse += r * r;
  }
  const double sigma2 = sse / static_cast<double>(n - 2);
  const double se = std::sqrt(sigma2 / sxx);
  return {slope, se > 0.0 ? slope / se : 0.0};
}

}  // namespace odltest
