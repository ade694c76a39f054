#include "odl/replay.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include <json.hpp>

#include "odl/errors.hpp"
#include "odl/rng.hpp"

namespace odl {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double kPretrainRelTol = 1e-3;
constexpr std::uint32_t kPretrainMaxPasses = 10;

std::string format_double(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof buffer, "%.10g", value);
  return buffer;
}

struct DayAccumulator {
  std::int64_t day = 0;
  std::uint64_t events = 0;
  double loss_sum = 0.0;
  std::vector<std::pair<double, int>> scored;
};

}  // namespace

void ReplaySpec::validate() const {
  policy.validate();
}

PretrainResult pretrain(const ModelConfig& config, const EventStream& events,
                        std::uint32_t pretrain_days) {
  config.validate();
  PretrainResult result;
  result.state = init_model(config);
  if (pretrain_days == 0 || events.empty()) {
    return result;
  }
  const std::int64_t first_day = day_of(events.front().timestamp);
  const std::int64_t span_end_day = first_day + pretrain_days;  // exclusive
  std::size_t span_begin = 0;
  while (span_begin < events.size() && day_of(events[span_begin].timestamp) < span_end_day) {
    ++span_begin;
  }
  result.span_begin = span_begin;
  if (span_begin == 0) {
    return result;
  }

  // Offline training until convergence: stop when the relative improvement of
  // mean training log loss between consecutive passes drops below 1e-3.
  double previous_mean = 0.0;
  for (std::uint32_t pass = 1; pass <= kPretrainMaxPasses; ++pass) {
    double loss_sum = 0.0;
    for (std::size_t i = 0; i < span_begin; ++i) {
      loss_sum += sgd_step(result.state, events[i]);
    }
    result.example_updates += span_begin;
    result.passes = pass;
    const double mean = loss_sum / static_cast<double>(span_begin);
    if (pass > 1 && (previous_mean - mean) < kPretrainRelTol * previous_mean) {
      break;
    }
    previous_mean = mean;
  }
  return result;
}

std::optional<double> compute_auc(std::span<const std::pair<double, int>> scored) {
  if (scored.empty()) {
    throw DataError("compute_auc: empty input");
  }
  std::vector<std::pair<double, int>> sorted(scored.begin(), scored.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  std::uint64_t positives = 0;
  for (const auto& [score, label] : sorted) {
    positives += label == 1 ? 1 : 0;
  }
  const std::uint64_t negatives = sorted.size() - positives;
  if (positives == 0 || negatives == 0) {
    return std::nullopt;
  }

  // Average ranks within tie groups.
  double positive_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j].first == sorted[i].first) ++j;
    const double average_rank = static_cast<double>(i + 1 + j) / 2.0;  // ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k) {
      if (sorted[k].second == 1) positive_rank_sum += average_rank;
    }
    i = j;
  }
  const double np = static_cast<double>(positives);
  const double nn = static_cast<double>(negatives);
  return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double auc_standard_error(double auc, std::uint64_t positives, std::uint64_t negatives) {
  // Hanley & McNeil (1982).
  const double a = auc;
  const double np = static_cast<double>(positives);
  const double nn = static_cast<double>(negatives);
  const double q1 = a / (2.0 - a);
  const double q2 = 2.0 * a * a / (1.0 + a);
  const double variance =
      (a * (1.0 - a) + (np - 1.0) * (q1 - a * a) + (nn - 1.0) * (q2 - a * a)) / (np * nn);
  return std::sqrt(std::max(variance, 0.0));
}

double holdout_log_loss(const ModelState& state, const EventStream& events,
                        std::int64_t holdout_day) {
  double loss_sum = 0.0;
  std::uint64_t count = 0;
  for (const Event& event : events) {
    if (day_of(event.timestamp) != holdout_day) continue;
    const Prediction prediction = predict(state, event.user_id, event.item_id, event.context);
    loss_sum += log_loss(prediction.probability, event.label);
    ++count;
  }
  if (count == 0) {
    throw DataError("holdout_log_loss: no events on day " + std::to_string(holdout_day));
  }
  return loss_sum / static_cast<double>(count);
}

std::vector<ConvergencePoint> batch_holdout_curve(const ModelConfig& config,
                                                  const EventStream& events,
                                                  std::int64_t holdout_day) {
  config.validate();
  if (events.empty()) {
    throw DataError("batch_holdout_curve: empty stream");
  }
  const std::int64_t first_day = day_of(events.front().timestamp);
  std::vector<ConvergencePoint> curve;
  std::uint64_t session = 0;
  std::size_t end_index = 0;
  for (std::int64_t day = first_day; day < holdout_day; ++day, ++session) {
    while (end_index < events.size() && day_of(events[end_index].timestamp) <= day) {
      ++end_index;
    }
    if (end_index == 0) continue;
    ModelConfig session_config = config;
    session_config.seed = mix_seed(config.seed, session);
    ModelState state = init_model(session_config);
    for (std::size_t i = 0; i < end_index; ++i) {
      sgd_step(state, events[i]);
    }
    curve.push_back({day - first_day + 1, holdout_log_loss(state, events, holdout_day)});
  }
  return curve;
}

ReplayReport replay(const ReplaySpec& spec, const ModelConfig& config,
                    const EventStream& events, const ReplayEventHook& event_hook) {
  spec.validate();
  config.validate();
  if (events.empty()) {
    throw DataError("replay: empty stream");
  }
  const std::int64_t first_day = day_of(events.front().timestamp);
  const std::int64_t last_day = day_of(events.back().timestamp);
  const std::int64_t total_days = last_day - first_day + 1;
  if (static_cast<std::int64_t>(spec.pretrain_days) >= total_days) {
    throw ConfigError("replay: pretrain_days (" + std::to_string(spec.pretrain_days) +
                      ") must be smaller than the stream's day count (" +
                      std::to_string(total_days) + ")");
  }

  PretrainResult pre = pretrain(config, events, spec.pretrain_days);

  std::vector<DayAccumulator> day_accs;
  std::vector<std::pair<double, int>> all_scored;
  const EvalHook hook = [&](std::size_t index, const Event& event, const Prediction& prediction) {
    const std::int64_t d = day_of(event.timestamp);
    if (day_accs.empty() || day_accs.back().day != d) {
      day_accs.push_back({d, 0, 0.0, {}});
    }
    DayAccumulator& acc = day_accs.back();
    ++acc.events;
    acc.loss_sum += log_loss(prediction.probability, event.label);
    acc.scored.emplace_back(prediction.score, event.label);
    all_scored.emplace_back(prediction.score, event.label);
    if (event_hook) event_hook(index, event, prediction);
  };

  PolicyRunOptions options;
  options.span_begin = pre.span_begin;
  options.holdout_begin_day = last_day;  // the final day is never trained on
  PolicyRunResult run =
      run_policy_span(spec.policy, std::move(pre.state), events, options, hook);

  ReplayReport report;
  report.policy_name = spec.policy.describe();
  report.pretrain_days = spec.pretrain_days;
  report.pretrain_passes = pre.passes;
  report.pretrain_example_updates = pre.example_updates;
  report.cost = std::move(run.cost);
  // Session days are reported 1-based relative to the stream start, matching
  // the daily metric rows.
  for (SessionCost& session : report.cost.sessions) {
    session.day = session.day - first_day + 1;
  }
  report.evaluated_events = all_scored.size();
  report.final_state = std::move(run.state);

  if (day_accs.empty()) {
    throw DataError("replay: no events in the evaluation span");
  }
  report.first_eval_day = day_accs.front().day - first_day + 1;
  report.last_eval_day = day_accs.back().day - first_day + 1;
  report.cumulative_auc = compute_auc(all_scored);
  report.final_holdout_log_loss =
      day_accs.back().loss_sum / static_cast<double>(day_accs.back().events);

  if (spec.metrics_window == MetricsWindow::kPerDay) {
    for (const DayAccumulator& acc : day_accs) {
      DayMetrics metrics;
      metrics.day = acc.day - first_day + 1;
      metrics.events = acc.events;
      metrics.log_loss = acc.loss_sum / static_cast<double>(acc.events);
      metrics.auc = compute_auc(acc.scored);
      report.daily.push_back(std::move(metrics));
    }
  } else {
    std::vector<std::pair<double, int>> running;
    std::uint64_t running_events = 0;
    double running_loss = 0.0;
    for (const DayAccumulator& acc : day_accs) {
      running.insert(running.end(), acc.scored.begin(), acc.scored.end());
      running_events += acc.events;
      running_loss += acc.loss_sum;
      DayMetrics metrics;
      metrics.day = acc.day - first_day + 1;
      metrics.events = running_events;
      metrics.log_loss = running_loss / static_cast<double>(running_events);
      metrics.auc = compute_auc(running);
      report.daily.push_back(std::move(metrics));
    }
  }
  return report;
}

std::vector<LiftRow> lift_table(std::span<const ReplayReport> reports,
                                std::size_t baseline_index) {
  if (reports.size() < 2) {
    throw ConfigError("lift_table: need at least two reports");
  }
  if (baseline_index >= reports.size()) {
    throw ConfigError("lift_table: baseline index out of range");
  }
  const ReplayReport& baseline = reports[baseline_index];
  for (const ReplayReport& report : reports) {
    if (report.first_eval_day != baseline.first_eval_day ||
        report.last_eval_day != baseline.last_eval_day ||
        report.evaluated_events != baseline.evaluated_events) {
      throw DataError("lift_table: reports cover mismatched spans (" + report.policy_name +
                      " vs " + baseline.policy_name + ")");
    }
  }
  if (!baseline.cumulative_auc.has_value()) {
    throw DataError("lift_table: baseline AUC is undefined (single-class span)");
  }
  if (baseline.cost.total_example_updates == 0) {
    throw NumericError("lift_table: baseline performed zero updates");
  }

  std::vector<LiftRow> rows;
  rows.reserve(reports.size());
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const ReplayReport& report = reports[i];
    LiftRow row;
    row.policy = report.policy_name;
    if (i == baseline_index) {
      row.auc_lift_percent = 0.0;
      row.cost_ratio = 1.0;
    } else {
      if (!report.cumulative_auc.has_value()) {
        throw DataError("lift_table: AUC undefined for policy " + report.policy_name);
      }
      row.auc_lift_percent =
          100.0 * (*report.cumulative_auc - *baseline.cumulative_auc) / *baseline.cumulative_auc;
      row.cost_ratio = static_cast<double>(report.cost.total_example_updates) /
                       static_cast<double>(baseline.cost.total_example_updates);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_metrics_csv(const ReplayReport& report, std::ostream& out) {
  out << "day,policy,events,log_loss,auc\n";
  for (const DayMetrics& metrics : report.daily) {
    out << metrics.day << ',' << report.policy_name << ',' << metrics.events << ','
        << format_double(metrics.log_loss) << ','
        << (metrics.auc ? format_double(*metrics.auc) : "NA") << '\n';
  }
}

void write_summary_json(const ReplayReport& report, std::ostream& out) {
  ordered_json summary;
  summary["policy"] = report.policy_name;
  summary["pretrain_days"] = report.pretrain_days;
  summary["pretrain_passes"] = report.pretrain_passes;
  summary["pretrain_example_updates"] = report.pretrain_example_updates;
  if (report.cumulative_auc) {
    summary["cumulative_auc"] = *report.cumulative_auc;
  } else {
    summary["cumulative_auc"] = nullptr;
  }
  summary["final_holdout_log_loss"] = report.final_holdout_log_loss;
  summary["total_example_updates"] = report.cost.total_example_updates;
  summary["retrain_sessions"] = report.cost.retrain_sessions;
  summary["evaluated_events"] = report.evaluated_events;
  summary["first_eval_day"] = report.first_eval_day;
  summary["last_eval_day"] = report.last_eval_day;
  ordered_json sessions = ordered_json::array();
  for (const SessionCost& session : report.cost.sessions) {
    sessions.push_back({{"day", session.day}, {"updates", session.example_updates}});
  }
  summary["cost_sessions"] = std::move(sessions);
  out << summary.dump(2) << '\n';
}

void write_lift_csv(std::span<const LiftRow> rows, std::ostream& out) {
  out << "policy,relative_auc_lift_percent,cost_ratio\n";
  for (const LiftRow& row : rows) {
    out << row.policy << ',' << format_double(row.auc_lift_percent) << ','
        << format_double(row.cost_ratio) << '\n';
  }
}

}  // namespace odl
