#include "odl/datagen.hpp"

#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include "odl/errors.hpp"
#include "odl/model.hpp"
#include "odl/rng.hpp"

namespace odl {

namespace {

struct ItemSlot {
  std::string id;
  std::vector<double> latent;
};

std::vector<double> fresh_latent(SplitMix64& rng, std::uint32_t dim, double scale) {
  std::vector<double> latent(dim);
  for (double& value : latent) {
    value = scale * rng.next_gaussian();
  }
  return latent;
}

}  // namespace

void DriftGenConfig::validate() const {
  if (num_users < 1) throw ConfigError("datagen: num_users must be >= 1");
  if (num_items_initial < 1) throw ConfigError("datagen: num_items_initial must be >= 1");
  if (latent_dim < 1) throw ConfigError("datagen: latent_dim must be >= 1");
  if (days < 1) throw ConfigError("datagen: days must be >= 1");
  if (events_per_day < 1) throw ConfigError("datagen: events_per_day must be >= 1");
  if (!(drift_rate >= 0.0)) throw ConfigError("datagen: drift_rate must be >= 0");
  if (!(churn_rate >= 0.0 && churn_rate <= 1.0)) {
    throw ConfigError("datagen: churn_rate must be in [0, 1]");
  }
  if (!std::isfinite(label_bias)) throw ConfigError("datagen: label_bias must be finite");
}

GeneratedStream generate_with_truth(const DriftGenConfig& config) {
  config.validate();
  // One sequential stream defines the data; nothing here may be reordered.
  SplitMix64 rng(config.seed);

  // Latent variance 1/sqrt(k) per coordinate makes <theta, phi> unit-variance
  // regardless of latent_dim.
  const double latent_scale = std::pow(static_cast<double>(config.latent_dim), -0.25);

  std::vector<std::vector<double>> users(config.num_users);
  for (auto& latent : users) {
    latent = fresh_latent(rng, config.latent_dim, latent_scale);
  }
  std::vector<ItemSlot> items(config.num_items_initial);
  std::uint64_t item_serial = 0;
  for (ItemSlot& slot : items) {
    slot.id = "item-" + std::to_string(item_serial++);
    slot.latent = fresh_latent(rng, config.latent_dim, latent_scale);
  }

  GeneratedStream result;
  result.events.reserve(static_cast<std::size_t>(config.days) * config.events_per_day);
  result.true_probability.reserve(result.events.capacity());

  std::vector<std::uint64_t> churn_pool(items.size());
  for (std::uint32_t day = 1; day <= config.days; ++day) {
    if (day > 1) {
      // Day boundary: every latent random-walks, then part of the catalog
      // churns into fresh ids with fresh latents.
      for (auto& latent : users) {
        for (double& value : latent) value += config.drift_rate * rng.next_gaussian();
      }
      for (ItemSlot& slot : items) {
        for (double& value : slot.latent) value += config.drift_rate * rng.next_gaussian();
      }
      const auto churn_count = static_cast<std::uint64_t>(
          std::floor(config.churn_rate * static_cast<double>(items.size())));
      if (churn_count > 0) {
        std::iota(churn_pool.begin(), churn_pool.end(), 0);
        for (std::uint64_t j = 0; j < churn_count; ++j) {  // partial Fisher-Yates
          const std::uint64_t pick = j + rng.next_below(churn_pool.size() - j);
          std::swap(churn_pool[j], churn_pool[pick]);
          ItemSlot& slot = items[churn_pool[j]];
          slot.id = "item-" + std::to_string(item_serial++);
          slot.latent = fresh_latent(rng, config.latent_dim, latent_scale);
        }
      }
    }

    const std::int64_t day_start = static_cast<std::int64_t>(day - 1) * kSecondsPerDay;
    for (std::uint32_t e = 0; e < config.events_per_day; ++e) {
      const std::uint64_t u = rng.next_below(config.num_users);
      const std::uint64_t i = rng.next_below(items.size());
      Event event;
      event.timestamp = day_start + static_cast<std::int64_t>(
                                        (static_cast<std::uint64_t>(e) * kSecondsPerDay) /
                                        config.events_per_day);
      event.user_id = "user-" + std::to_string(u);
      event.item_id = items[i].id;
      event.context.resize(config.context_dim);
      for (float& value : event.context) {
        value = static_cast<float>(rng.next_gaussian());
      }
      double dot = config.label_bias;
      for (std::uint32_t j = 0; j < config.latent_dim; ++j) {
        dot += users[u][j] * items[i].latent[j];
      }
      const double p = sigmoid(dot);
      event.label = rng.next_unit() < p ? 1 : 0;
      result.events.push_back(std::move(event));
      result.true_probability.push_back(p);
    }
  }
  return result;
}

EventStream generate(const DriftGenConfig& config) {
  return generate_with_truth(config).events;
}

}  // namespace odl
