#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "odl/datagen.hpp"
#include "odl/errors.hpp"
#include "odl/replay.hpp"
#include "odl/rng.hpp"
#include "support.hpp"

using namespace odl;

namespace {

ReplaySpec spec_of(PolicyKind kind, std::uint32_t pretrain_days = 0,
                   std::uint32_t cadence = 1) {
  ReplaySpec spec;
  spec.policy.kind = kind;
  spec.policy.cadence_days = cadence;
  spec.pretrain_days = pretrain_days;
  return spec;
}

EventStream drifting_stream(std::uint32_t days, std::uint32_t per_day, double drift,
                            std::uint64_t seed = 99) {
  DriftGenConfig config;
  config.seed = seed;
  config.num_users = 40;
  config.num_items_initial = 60;
  config.latent_dim = 8;
  config.days = days;
  config.events_per_day = per_day;
  config.drift_rate = drift;
  config.churn_rate = 0.05;
  config.context_dim = 0;
  return generate(config);
}

ModelConfig replay_model(std::uint32_t context_dim = 0) {
  ModelConfig config;
  config.embedding_dim = 8;
  config.learning_rate = 0.1f;
  config.context_dim = context_dim;
  config.init_scale = 0.05f;
  config.seed = 3;
  config.user_hash = {1024, HashMode::kSingle, 70, 71};
  config.item_hash = {1024, HashMode::kSingle, 80, 81};
  return config;
}

// Brute-force AUC oracle: all positive/negative pairs, ties count half.
double pairwise_auc(const std::vector<std::pair<double, int>>& scored) {
  double wins = 0.0;
  std::uint64_t pairs = 0;
  for (const auto& [sp, lp] : scored) {
    if (lp != 1) continue;
    for (const auto& [sn, ln] : scored) {
      if (ln != 0) continue;
      ++pairs;
      if (sp > sn) {
        wins += 1.0;
      } else if (sp == sn) {
        wins += 0.5;
      }
    }
  }
  return wins / static_cast<double>(pairs);
}

}  // namespace

TEST_CASE("constant-prediction log loss is ln 2") {
  // A zero-initialized model predicts 0.5 for everything; on a single-day
  // stream the policy never trains (the last day is the hold-out).
  ModelConfig config = odltest::small_model_config();
  config.init_scale = 0.0f;
  const EventStream one_day = odltest::uniform_stream(1, 64);
  const ReplayReport report = replay(spec_of(PolicyKind::kNone), config, one_day);
  REQUIRE(report.daily.size() == 1);
  CHECK(report.daily[0].log_loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(report.final_holdout_log_loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(report.cost.total_example_updates == 0);

  // On a longer stream the first day is still evaluated before any training.
  const EventStream two_days = odltest::uniform_stream(2, 64);
  const ReplayReport longer = replay(spec_of(PolicyKind::kNone), config, two_days);
  CHECK(longer.daily[0].log_loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("compute_auc: worked examples") {
  const std::vector<std::pair<double, int>> example = {
      {0.1, 0}, {0.4, 1}, {0.35, 0}, {0.8, 1}};
  CHECK(compute_auc(example) == 1.0);

  const std::vector<std::pair<double, int>> separated = {
      {-2.0, 0}, {-1.0, 0}, {1.0, 1}, {2.0, 1}};
  CHECK(compute_auc(separated) == 1.0);

  const std::vector<std::pair<double, int>> single_class = {{0.2, 1}, {0.3, 1}};
  CHECK(!compute_auc(single_class).has_value());

  const std::vector<std::pair<double, int>> empty;
  CHECK_THROWS_AS(compute_auc(empty), DataError);

  const std::vector<std::pair<double, int>> tied = {{0.5, 1}, {0.5, 0}};
  CHECK(compute_auc(tied) == 0.5);
}

TEST_CASE("compute_auc matches the brute-force pair oracle") {
  SplitMix64 rng(404);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::pair<double, int>> scored;
    const std::size_t n = 5 + rng.next_below(40);
    bool has_pos = false, has_neg = false;
    for (std::size_t i = 0; i < n; ++i) {
      // quantized scores so ties actually occur
      const double score = static_cast<double>(rng.next_below(10)) / 10.0;
      const int label = static_cast<int>(rng.next_below(2));
      has_pos |= label == 1;
      has_neg |= label == 0;
      scored.emplace_back(score, label);
    }
    if (!has_pos || !has_neg) continue;
    const auto fast = compute_auc(scored);
    REQUIRE(fast.has_value());
    CHECK(*fast >= 0.0);
    CHECK(*fast <= 1.0);
    CHECK(*fast == doctest::Approx(pairwise_auc(scored)).epsilon(1e-12));
  }
}

TEST_CASE("no leakage: every recorded prediction is prefix-computable") {
  // Fully-online 2-day replay: the recorded prediction for event t must be
  // bit-identical to a fresh model trained on the trainable events before t
  // (the second day is the hold-out and is never trained on).
  const EventStream events = odltest::uniform_stream(2, 40, 2);
  const ModelConfig config = odltest::small_model_config(2);

  std::vector<Prediction> recorded(events.size());
  const ReplayReport report =
      replay(spec_of(PolicyKind::kFullyOnline), config, events,
             [&](std::size_t index, const Event&, const Prediction& prediction) {
               recorded[index] = prediction;
             });

  const std::int64_t holdout_day = day_of(events.back().timestamp);
  for (std::size_t t = 0; t < events.size(); ++t) {
    ModelState oracle = init_model(config);
    for (std::size_t i = 0; i < t; ++i) {
      if (day_of(events[i].timestamp) >= holdout_day) continue;
      sgd_step(oracle, events[i]);
    }
    const Prediction expected =
        predict(oracle, events[t].user_id, events[t].item_id, events[t].context);
    REQUIRE(recorded[t].score == expected.score);
  }
  CHECK(report.cost.total_example_updates == 40);  // day 2 never trained
}

TEST_CASE("online adaptation beats the frozen baseline on a drifting stream") {
  const EventStream events = drifting_stream(10, 1500, 0.2);
  const ModelConfig config = replay_model();
  const ReplayReport frozen = replay(spec_of(PolicyKind::kNone), config, events);
  const ReplayReport online = replay(spec_of(PolicyKind::kFullyOnline), config, events);
  REQUIRE(frozen.cumulative_auc.has_value());
  REQUIRE(online.cumulative_auc.has_value());
  CHECK(*online.cumulative_auc > *frozen.cumulative_auc);
}

TEST_CASE("the hold-out day is never trained by any policy") {
  const EventStream events = odltest::uniform_stream(5, 30);
  const ModelConfig config = odltest::small_model_config();
  const ReplayReport stateful = replay(spec_of(PolicyKind::kStatefulIncremental), config, events);
  CHECK(stateful.cost.retrain_sessions == 4);  // days 1..4; day 5 is held out
  for (const SessionCost& session : stateful.cost.sessions) {
    CHECK(session.day <= 4);
  }
  CHECK(stateful.evaluated_events == events.size());
  CHECK(stateful.first_eval_day == 1);
  CHECK(stateful.last_eval_day == 5);
}

TEST_CASE("pre-training lowers the first fine-tune day's loss") {
  const EventStream events = drifting_stream(8, 1500, 0.03, 7);
  const ModelConfig config = replay_model();
  const ReplayReport cold = replay(spec_of(PolicyKind::kFullyOnline, 0), config, events);
  const ReplayReport warm = replay(spec_of(PolicyKind::kFullyOnline, 4), config, events);
  CHECK(warm.daily.front().log_loss < cold.daily.front().log_loss);
  CHECK(warm.pretrain_passes >= 2);
  CHECK(warm.pretrain_passes <= 10);
  CHECK(warm.pretrain_example_updates == warm.pretrain_passes * 4 * 1500);
  CHECK(warm.first_eval_day == 5);
}

TEST_CASE("replay validates its configuration") {
  const EventStream events = odltest::uniform_stream(3, 10);
  const ModelConfig config = odltest::small_model_config();
  CHECK_THROWS_AS(replay(spec_of(PolicyKind::kNone, 3), config, events), ConfigError);
  CHECK_THROWS_AS(replay(spec_of(PolicyKind::kNone), config, EventStream{}), DataError);
}

TEST_CASE("cumulative metrics window accumulates") {
  const EventStream events = odltest::uniform_stream(4, 50, 1);
  const ModelConfig config = odltest::small_model_config(1);
  ReplaySpec spec = spec_of(PolicyKind::kFullyOnline);
  spec.metrics_window = MetricsWindow::kCumulative;
  const ReplayReport report = replay(spec, config, events);
  REQUIRE(report.daily.size() == 4);
  CHECK(report.daily.back().events == events.size());
  REQUIRE(report.daily.back().auc.has_value());
  REQUIRE(report.cumulative_auc.has_value());
  CHECK(*report.daily.back().auc == doctest::Approx(*report.cumulative_auc).epsilon(1e-12));
  for (std::size_t i = 1; i < report.daily.size(); ++i) {
    CHECK(report.daily[i].events > report.daily[i - 1].events);
  }
}

TEST_CASE("lift_table: identity row, shape and span checks") {
  const EventStream events = drifting_stream(6, 300, 0.1, 21);
  const ModelConfig config = replay_model();
  std::vector<ReplayReport> reports;
  reports.push_back(replay(spec_of(PolicyKind::kNone), config, events));
  reports.push_back(replay(spec_of(PolicyKind::kStatefulIncremental), config, events));
  reports.push_back(replay(spec_of(PolicyKind::kFullyOnline), config, events));

  const std::vector<LiftRow> rows = lift_table(reports, 0);
  REQUIRE(rows.size() == reports.size());
  CHECK(rows[0].auc_lift_percent == 0.0);
  CHECK(rows[0].cost_ratio == 1.0);
  CHECK(rows[0].policy == "none");

  std::vector<ReplayReport> mismatched;
  mismatched.push_back(replay(spec_of(PolicyKind::kNone), config, events));
  mismatched.push_back(replay(spec_of(PolicyKind::kNone, 2), config, events));
  CHECK_THROWS_AS(lift_table(mismatched, 0), DataError);

  std::vector<ReplayReport> too_few;
  too_few.push_back(replay(spec_of(PolicyKind::kNone), config, events));
  CHECK_THROWS_AS(lift_table(too_few, 0), ConfigError);
}

TEST_CASE("metric files are byte-identical across reruns") {
  const EventStream events = drifting_stream(5, 200, 0.1, 33);
  const ModelConfig config = replay_model();
  const auto render = [&]() {
    const ReplayReport report =
        replay(spec_of(PolicyKind::kStatefulIncremental), config, events);
    std::ostringstream csv, json;
    write_metrics_csv(report, csv);
    write_summary_json(report, json);
    return csv.str() + "\x1e" + json.str();
  };
  const std::string first = render();
  CHECK(first == render());
  CHECK(first.find("day,policy,events,log_loss,auc\n") == 0);
  CHECK(first.find("stateful-c1") != std::string::npos);
}

TEST_CASE("auc standard error shrinks with sample size") {
  const double small = auc_standard_error(0.7, 50, 50);
  const double large = auc_standard_error(0.7, 5000, 5000);
  CHECK(small > large);
  CHECK(large > 0.0);
}

TEST_CASE("batch hold-out curve has one point per training day") {
  const EventStream events = odltest::uniform_stream(6, 40, 1);
  ModelConfig config = odltest::small_model_config(1);
  const std::int64_t holdout = day_of(events.back().timestamp);
  const auto curve = batch_holdout_curve(config, events, holdout);
  REQUIRE(curve.size() == 5);
  for (std::size_t i = 0; i < curve.size(); ++i) {
    CHECK(curve[i].day == static_cast<std::int64_t>(i + 1));
    CHECK(std::isfinite(curve[i].holdout_log_loss));
  }
  // deterministic
  const auto again = batch_holdout_curve(config, events, holdout);
  CHECK(again[4].holdout_log_loss == curve[4].holdout_log_loss);

  CHECK_THROWS_AS(holdout_log_loss(init_model(config), events, holdout + 7), DataError);
}
