#include "odl/policies.hpp"

#include <algorithm>
#include <charconv>
#include <utility>

#include "odl/errors.hpp"
#include "odl/rng.hpp"

namespace odl {

namespace {

struct DayRange {
  std::int64_t day = 0;
  std::size_t lo = 0;
  std::size_t hi = 0;  // [lo, hi)
};

// Groups the stream into calendar-day runs, validating timestamp order.
std::vector<DayRange> index_days(const EventStream& events) {
  std::vector<DayRange> days;
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (i > 0 && events[i].timestamp < events[i - 1].timestamp) {
      throw DataError("policy run: stream not timestamp-ordered at event " + std::to_string(i));
    }
    const std::int64_t d = day_of(events[i].timestamp);
    if (days.empty() || days.back().day != d) {
      days.push_back({d, i, i + 1});
    } else {
      days.back().hi = i + 1;
    }
  }
  return days;
}

std::uint32_t parse_count(std::string_view token, std::string_view what) {
  std::uint32_t value = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size() || value == 0) {
    throw ConfigError("policy: bad " + std::string(what) + " '" + std::string(token) + "'");
  }
  return value;
}

}  // namespace

void RetrainPolicy::validate() const {
  if (cadence_days < 1) throw ConfigError("policy: cadence_days must be >= 1");
  if (epochs_per_retrain < 1) throw ConfigError("policy: epochs_per_retrain must be >= 1");
  if (kind == PolicyKind::kStatelessWindow && window_days < 1) {
    throw ConfigError("policy: stateless window_days must be >= 1");
  }
}

std::string RetrainPolicy::describe() const {
  std::string name;
  switch (kind) {
    case PolicyKind::kNone:
      return "none";
    case PolicyKind::kFullyOnline:
      return "online";
    case PolicyKind::kStatefulIncremental:
      name = "stateful-c" + std::to_string(cadence_days);
      break;
    case PolicyKind::kStatelessWindow:
      name = "stateless-w" + std::to_string(window_days) + "-c" + std::to_string(cadence_days);
      break;
  }
  if (epochs_per_retrain > 1) name += "-e" + std::to_string(epochs_per_retrain);
  return name;
}

RetrainPolicy parse_policy(std::string_view text) {
  RetrainPolicy policy;
  std::vector<std::string_view> tokens;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t sep = text.find('-', start);
    if (sep == std::string_view::npos) {
      tokens.push_back(text.substr(start));
      break;
    }
    tokens.push_back(text.substr(start, sep - start));
    start = sep + 1;
  }
  if (tokens.empty() || tokens[0].empty()) {
    throw ConfigError("policy: empty descriptor");
  }

  const std::string_view kind = tokens[0];
  bool saw_window = false;
  if (kind == "none") {
    policy.kind = PolicyKind::kNone;
  } else if (kind == "online" || kind == "fully_online") {
    policy.kind = PolicyKind::kFullyOnline;
  } else if (kind == "stateful") {
    policy.kind = PolicyKind::kStatefulIncremental;
  } else if (kind == "stateless") {
    policy.kind = PolicyKind::kStatelessWindow;
  } else {
    throw ConfigError("policy: unknown kind '" + std::string(kind) + "'");
  }

  for (std::size_t i = 1; i < tokens.size(); ++i) {
    const std::string_view token = tokens[i];
    if (token == "daily") {
      policy.cadence_days = 1;
    } else if (token == "weekly") {
      policy.cadence_days = 7;
    } else if (token.size() >= 2 && token[0] == 'c') {
      policy.cadence_days = parse_count(token.substr(1), "cadence");
    } else if (token.size() >= 2 && token[0] == 'w') {
      policy.window_days = parse_count(token.substr(1), "window");
      saw_window = true;
    } else if (token.size() >= 2 && token[0] == 'e') {
      policy.epochs_per_retrain = parse_count(token.substr(1), "epochs");
    } else {
      throw ConfigError("policy: unknown token '" + std::string(token) + "' in '" +
                        std::string(text) + "'");
    }
  }
  if (policy.kind == PolicyKind::kStatelessWindow && !saw_window) {
    throw ConfigError("policy: stateless descriptor needs a window, e.g. stateless-daily-w4");
  }
  policy.validate();
  return policy;
}

std::int64_t CostMeter::first_session_day() const {
  return sessions.empty() ? kNoSession : sessions.front().day;
}

std::uint64_t CostMeter::updates_from_day(std::int64_t day) const {
  std::uint64_t total = 0;
  for (const SessionCost& session : sessions) {
    if (session.day >= day) total += session.example_updates;
  }
  return total;
}

double cost_ratio(const CostMeter& stateless_meter, const CostMeter& stateful_meter) {
  if (stateful_meter.total_example_updates == 0) {
    throw NumericError("cost_ratio: denominator meter has zero updates");
  }
  return static_cast<double>(stateless_meter.total_example_updates) /
         static_cast<double>(stateful_meter.total_example_updates);
}

double cost_ratio_common_span(const CostMeter& a, const CostMeter& b) {
  if (a.sessions.empty() || b.sessions.empty()) {
    throw NumericError("cost_ratio_common_span: a meter recorded no sessions");
  }
  const std::int64_t from = std::max(a.first_session_day(), b.first_session_day());
  const std::uint64_t a_updates = a.updates_from_day(from);
  const std::uint64_t b_updates = b.updates_from_day(from);
  if (b_updates == 0) {
    throw NumericError("cost_ratio_common_span: denominator has zero updates in the common span");
  }
  return static_cast<double>(a_updates) / static_cast<double>(b_updates);
}

PolicyRunResult run_policy_span(const RetrainPolicy& policy, ModelState initial,
                                const EventStream& events, const PolicyRunOptions& options,
                                const EvalHook& eval_hook, const SessionHook& session_hook) {
  policy.validate();
  PolicyRunResult result{std::move(initial), {}};
  const std::vector<DayRange> days = index_days(events);
  if (events.empty() || options.span_begin >= events.size()) {
    return result;
  }

  const std::int64_t stream_first_day = days.front().day;
  const std::int64_t span_first_day = day_of(events[options.span_begin].timestamp);
  const std::int64_t last_day = days.back().day;
  const std::int64_t trainable_end_day =
      options.holdout_begin_day > last_day ? last_day
                                           : std::min(last_day, options.holdout_begin_day - 1);

  // First index after every event of calendar day <= d.
  const auto end_index_of_day = [&](std::int64_t d) -> std::size_t {
    auto it = std::upper_bound(days.begin(), days.end(), d,
                               [](std::int64_t v, const DayRange& r) { return v < r.day; });
    return it == days.begin() ? 0 : std::prev(it)->hi;
  };

  CostMeter& meter = result.cost;
  const ModelConfig base_config = result.state.config;
  std::size_t stateful_trained_end = options.span_begin;

  // One training session over events [lo, hi), epochs_per_retrain passes.
  const auto train_session = [&](std::size_t lo, std::size_t hi, std::int64_t session_day,
                                 bool reinitialize) {
    if (lo >= hi) return;  // nothing accrued: session skipped, not counted
    if (reinitialize) {
      ModelConfig session_config = base_config;
      session_config.seed = mix_seed(base_config.seed, meter.retrain_sessions);
      result.state = init_model(session_config);
    }
    std::uint64_t updates = 0;
    for (std::uint32_t epoch = 0; epoch < policy.epochs_per_retrain; ++epoch) {
      if (policy.shuffle_within_session) {
        std::vector<std::size_t> order(hi - lo);
        for (std::size_t k = 0; k < order.size(); ++k) order[k] = lo + k;
        SplitMix64 shuffle_rng(
            mix_seed(mix_seed(base_config.seed, 0x5348ULL), meter.retrain_sessions * 131 + epoch));
        for (std::size_t k = order.size(); k > 1; --k) {
          std::swap(order[k - 1], order[shuffle_rng.next_below(k)]);
        }
        for (const std::size_t idx : order) {
          sgd_step(result.state, events[idx]);
          ++updates;
        }
      } else {
        for (std::size_t idx = lo; idx < hi; ++idx) {
          sgd_step(result.state, events[idx]);
          ++updates;
        }
      }
    }
    meter.total_example_updates += updates;
    meter.retrain_sessions += 1;
    meter.sessions.push_back({session_day, updates});
    if (session_hook) session_hook(session_day, result.state);
  };

  // Boundary processing at the close of calendar day d.
  const auto close_day = [&](std::int64_t d) {
    if (d > trainable_end_day) return;
    const std::int64_t day_number = d - span_first_day + 1;  // 1-based within span
    switch (policy.kind) {
      case PolicyKind::kNone: {
        if (d == span_first_day) {
          train_session(options.span_begin, end_index_of_day(d), d, false);
        }
        break;
      }
      case PolicyKind::kStatelessWindow: {
        if (day_number % policy.cadence_days != 0) break;
        const std::int64_t accrued_days = d - stream_first_day + 1;
        if (accrued_days < static_cast<std::int64_t>(policy.window_days)) break;  // warm-up
        const std::size_t lo = end_index_of_day(d - policy.window_days);
        train_session(lo, end_index_of_day(d), d, true);
        break;
      }
      case PolicyKind::kStatefulIncremental: {
        if (day_number % policy.cadence_days != 0) break;
        const std::size_t hi = end_index_of_day(d);
        train_session(stateful_trained_end, hi, d, false);
        stateful_trained_end = std::max(stateful_trained_end, hi);
        break;
      }
      case PolicyKind::kFullyOnline:
        break;
    }
  };

  std::int64_t current_day = span_first_day;
  std::uint64_t online_today = 0;
  const auto flush_online_day = [&](std::int64_t d) {
    if (online_today > 0) {
      meter.sessions.push_back({d, online_today});
      online_today = 0;
    }
  };

  for (std::size_t i = options.span_begin; i < events.size(); ++i) {
    const Event& event = events[i];
    const std::int64_t d = day_of(event.timestamp);
    while (d > current_day) {
      close_day(current_day);
      flush_online_day(current_day);
      ++current_day;
    }
    if (eval_hook) {
      eval_hook(i, event, predict(result.state, event.user_id, event.item_id, event.context));
    }
    if (policy.kind == PolicyKind::kFullyOnline && d <= trainable_end_day) {
      sgd_step(result.state, event);
      ++meter.total_example_updates;
      ++online_today;
    }
  }
  close_day(current_day);
  flush_online_day(current_day);
  return result;
}

PolicyRunResult run_policy(const RetrainPolicy& policy, const ModelConfig& config,
                           const EventStream& events, const EvalHook& eval_hook,
                           const SessionHook& session_hook) {
  config.validate();
  return run_policy_span(policy, init_model(config), events, PolicyRunOptions{}, eval_hook,
                         session_hook);
}

}  // namespace odl
