#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "odl/policies.hpp"

namespace odl {

// Prequential (predict-then-update) replay: pre-train on the leading days,
// then walk the rest of the stream recording every prediction before the
// policy may train on the event. The last day of the stream is the hold-out:
// it is evaluated but never trained on by any policy.

enum class MetricsWindow : std::uint8_t { kPerDay = 0, kCumulative = 1 };

struct ReplaySpec {
  std::uint32_t pretrain_days = 0;
  RetrainPolicy policy;
  MetricsWindow metrics_window = MetricsWindow::kPerDay;

  void validate() const;
};

struct DayMetrics {
  std::int64_t day = 0;  // 1-based day index within the stream
  std::uint64_t events = 0;
  double log_loss = 0.0;            // mean per-example
  std::optional<double> auc;        // absent when the day has one label class
};

struct ReplayReport {
  std::string policy_name;
  std::uint32_t pretrain_days = 0;
  std::uint32_t pretrain_passes = 0;
  std::uint64_t pretrain_example_updates = 0;
  std::vector<DayMetrics> daily;          // per metrics_window
  std::optional<double> cumulative_auc;   // over the whole evaluated span
  double final_holdout_log_loss = 0.0;    // mean over the last (untrained) day
  CostMeter cost;
  std::uint64_t evaluated_events = 0;
  std::int64_t first_eval_day = 0;  // 1-based, relative to stream start
  std::int64_t last_eval_day = 0;
  ModelState final_state;
};

using ReplayEventHook =
    std::function<void(std::size_t index, const Event& event, const Prediction& prediction)>;

ReplayReport replay(const ReplaySpec& spec, const ModelConfig& config,
                    const EventStream& events, const ReplayEventHook& event_hook = {});

// Offline pre-training pass: repeated passes over the first `pretrain_days`
// days until the relative improvement of mean training log loss drops below
// 1e-3, capped at 10 passes.
struct PretrainResult {
  ModelState state;
  std::uint32_t passes = 0;
  std::uint64_t example_updates = 0;
  std::size_t span_begin = 0;  // index of the first event after the pre-train span
};

PretrainResult pretrain(const ModelConfig& config, const EventStream& events,
                        std::uint32_t pretrain_days);

// Mann-Whitney rank AUC with average-rank tie handling over (score, label)
// pairs; nullopt when only one class is present. Throws DataError when empty.
std::optional<double> compute_auc(std::span<const std::pair<double, int>> scored);

// Hanley-McNeil standard error of an AUC estimate.
double auc_standard_error(double auc, std::uint64_t positives, std::uint64_t negatives);

// Mean log loss of `state` over the events of one calendar day.
double holdout_log_loss(const ModelState& state, const EventStream& events,
                        std::int64_t holdout_day);

// Fig-2-style batch curve: for each calendar day t before `holdout_day`, a
// fresh model (session-seeded from config.seed) trained one chronological
// pass over all events up to day t, evaluated on the hold-out day.
struct ConvergencePoint {
  std::int64_t day = 0;  // 1-based day index within the stream
  double holdout_log_loss = 0.0;
};

std::vector<ConvergencePoint> batch_holdout_curve(const ModelConfig& config,
                                                  const EventStream& events,
                                                  std::int64_t holdout_day);

struct LiftRow {
  std::string policy;
  double auc_lift_percent = 0.0;   // 100 * (auc - auc_baseline) / auc_baseline
  double cost_ratio = 0.0;         // policy updates / baseline updates
};

// Relative comparison of reports over the same evaluated span; the baseline
// row shows 0.0 lift and 1.0 cost ratio. Throws DataError on mismatched spans.
std::vector<LiftRow> lift_table(std::span<const ReplayReport> reports,
                                std::size_t baseline_index);

// Metrics CSV: "day,policy,events,log_loss,auc" (auc column "NA" when
// undefined). Byte-deterministic for identical reports.
void write_metrics_csv(const ReplayReport& report, std::ostream& out);

// JSON summary with cumulative AUC, hold-out loss and the cost accounting.
void write_summary_json(const ReplayReport& report, std::ostream& out);

void write_lift_csv(std::span<const LiftRow> rows, std::ostream& out);

}  // namespace odl
