#pragma once

#include <cstdint>
#include <vector>

#include "odl/events.hpp"

namespace odl {

// Synthetic interaction stream with two controllable drift sources: user and
// item latent vectors take a random-walk step at every day boundary, and a
// fraction of the item catalog is retired and replaced with fresh ids each
// day. Fully deterministic given the seed.
struct DriftGenConfig {
  std::uint64_t seed = 0;
  std::uint32_t num_users = 100;
  std::uint32_t num_items_initial = 100;
  std::uint32_t latent_dim = 8;
  std::uint32_t days = 10;
  std::uint32_t events_per_day = 1000;
  double drift_rate = 0.0;  // per-day random-walk std of each latent coordinate
  double churn_rate = 0.0;  // fraction of the item catalog replaced per day
  std::uint32_t context_dim = 4;
  double label_bias = 0.0;

  void validate() const;  // throws ConfigError
};

// Events in timestamp order, exactly days * events_per_day of them,
// timestamps evenly spread within each day starting at epoch 0.
EventStream generate(const DriftGenConfig& config);

// Same stream plus the generating process's P(label=1) per event, so tests
// can use the ground truth as an oracle.
struct GeneratedStream {
  EventStream events;
  std::vector<double> true_probability;
};

GeneratedStream generate_with_truth(const DriftGenConfig& config);

}  // namespace odl
