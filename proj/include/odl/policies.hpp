#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "odl/events.hpp"
#include "odl/model.hpp"

namespace odl {

// The four retraining regimes under comparison:
//   none                - train once on the first day, then frozen
//   stateless_window    - at each cadence boundary, re-initialize and train on
//                         the trailing window of days from scratch
//   stateful_incremental- at each cadence boundary, continue from the current
//                         state and train only on the days since the previous
//                         boundary
//   fully_online        - one SGD step per event, immediately after evaluation
enum class PolicyKind : std::uint8_t {
  kNone = 0,
  kStatelessWindow = 1,
  kStatefulIncremental = 2,
  kFullyOnline = 3,
};

struct RetrainPolicy {
  PolicyKind kind = PolicyKind::kNone;
  std::uint32_t window_days = 1;  // stateless only
  std::uint32_t cadence_days = 1;
  std::uint32_t epochs_per_retrain = 1;
  bool shuffle_within_session = false;  // off by default: log order

  void validate() const;      // throws ConfigError
  std::string describe() const;  // canonical name, e.g. "stateless-w4-c1"
};

// Parses descriptors like "none", "online", "stateful-daily",
// "stateful-weekly", "stateless-daily-w4", "stateful-c3-e2".
RetrainPolicy parse_policy(std::string_view text);

struct SessionCost {
  std::int64_t day = 0;  // calendar day whose close triggered the session
  std::uint64_t example_updates = 0;
};

// Update-count cost of a policy run. Integer-exact and fully determined by
// (policy, stream); no wall-clock dependence. fully_online records one
// per-day entry in `sessions` but counts no retrain sessions.
struct CostMeter {
  std::uint64_t total_example_updates = 0;
  std::uint64_t retrain_sessions = 0;
  std::vector<SessionCost> sessions;

  static constexpr std::int64_t kNoSession = std::numeric_limits<std::int64_t>::min();
  std::int64_t first_session_day() const;
  std::uint64_t updates_from_day(std::int64_t day) const;
};

// Ratio of total update counts. Throws NumericError when the denominator is
// zero. Callers must ensure both meters cover the same stream span; see
// cost_ratio_common_span for the warm-up-aware version.
double cost_ratio(const CostMeter& stateless_meter, const CostMeter& stateful_meter);

// Ratio after restricting both meters to sessions at or after the later of
// the two first-session days (the first common boundary).
double cost_ratio_common_span(const CostMeter& a, const CostMeter& b);

// Called with each event and its pre-update prediction, before any update
// that could use the event (progressive validation).
using EvalHook = std::function<void(std::size_t index, const Event& event,
                                    const Prediction& prediction)>;

// Called after each completed training session with the day whose close
// triggered it and the state it produced.
using SessionHook = std::function<void(std::int64_t day, const ModelState& state)>;

struct PolicyRunOptions {
  // Index of the first event the policy evaluates/trains on; earlier events
  // are window-buffer context only (e.g. a pre-training span).
  std::size_t span_begin = 0;
  // Events on or after this calendar day are evaluated but never trained on.
  std::int64_t holdout_begin_day = std::numeric_limits<std::int64_t>::max();
};

struct PolicyRunResult {
  ModelState state;
  CostMeter cost;
};

// Walks the stream by day appling the policy's update schedule; the stream
// must be timestamp-ordered. Evaluation of every event happens before any
// update that uses it.
PolicyRunResult run_policy(const RetrainPolicy& policy, const ModelConfig& config,
                           const EventStream& events, const EvalHook& eval_hook = {},
                           const SessionHook& session_hook = {});

// Same engine, starting from an existing state (e.g. a pre-trained model)
// and honoring span/holdout boundaries. replay() is built on this.
PolicyRunResult run_policy_span(const RetrainPolicy& policy, ModelState initial,
                                const EventStream& events, const PolicyRunOptions& options,
                                const EvalHook& eval_hook = {},
                                const SessionHook& session_hook = {});

}  // namespace odl
