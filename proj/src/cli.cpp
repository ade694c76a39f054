#include "odl/cli.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "odl/checkpoint.hpp"
#include "odl/datagen.hpp"
#include "odl/errors.hpp"
#include "odl/events.hpp"
#include "odl/hashing.hpp"
#include "odl/replay.hpp"
#include "odl/rng.hpp"

namespace odl::cli {

namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

// Relative output paths land under $ODL_OUT_DIR when it is set.
fs::path resolve_output(const std::string& raw) {
  fs::path path(raw);
  const char* base = std::getenv(kOutDirEnvVar);
  if (base != nullptr && *base != '\0' && path.is_relative()) {
    return fs::path(base) / path;
  }
  return path;
}

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open '" + path.string() + "' for digesting");
  }
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  char buffer[24];
  std::snprintf(buffer, sizeof buffer, "%016llx",
                static_cast<unsigned long long>(xxh64(bytes.data(), bytes.size(), 0)));
  return buffer;
}

// Every command drops a manifest next to its outputs; reruns with an
// identical manifest produce identical outputs.
void write_manifest(const fs::path& manifest_path, const std::string& command,
                    ordered_json config, const std::vector<fs::path>& inputs,
                    const std::vector<fs::path>& outputs) {
  ordered_json manifest;
  manifest["tool"] = "odl";
  manifest["version"] = kVersion;
  manifest["command"] = command;
  manifest["config"] = std::move(config);
  ordered_json input_rows = ordered_json::array();
  for (const fs::path& input : inputs) {
    input_rows.push_back({{"path", input.string()}, {"xxh64", file_digest(input)}});
  }
  manifest["inputs"] = std::move(input_rows);
  ordered_json output_rows = ordered_json::array();
  for (const fs::path& output : outputs) {
    output_rows.push_back(output.string());
  }
  manifest["outputs"] = std::move(output_rows);

  std::ofstream out(manifest_path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open '" + manifest_path.string() + "' for writing");
  }
  out << manifest.dump(2) << '\n';
  if (!out) {
    throw IoError("write to '" + manifest_path.string() + "' failed");
  }
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open '" + path.string() + "' for writing");
  }
  out << text;
  out.flush();
  if (!out) {
    throw IoError("write to '" + path.string() + "' failed");
  }
}

std::vector<std::uint64_t> parse_bucket_list(const std::string& text) {
  std::vector<std::uint64_t> buckets;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t sep = text.find(',', start);
    if (sep == std::string::npos) sep = text.size();
    const std::string_view token(text.data() + start, sep - start);
    std::uint64_t value = 0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc{} || ptr != token.data() + token.size() || value == 0) {
      throw ConfigError("collisions: bad bucket count '" + std::string(token) + "'");
    }
    buckets.push_back(value);
    if (sep == text.size()) break;
    start = sep + 1;
  }
  return buckets;
}

// ---------------------------------------------------------------- gen ----

struct GenOptions {
  std::uint64_t seed = 0;
  std::uint32_t users = 100;
  std::uint32_t items = 100;
  std::uint32_t days = 10;
  std::uint32_t events_per_day = 1000;
  double drift_rate = 0.0;
  double churn_rate = 0.0;
  std::uint32_t latent_dim = 8;
  std::uint32_t context_dim = 4;
  double label_bias = 0.0;
  std::string out;
};

int run_gen(const GenOptions& options, std::ostream& out) {
  DriftGenConfig config;
  config.seed = options.seed;
  config.num_users = options.users;
  config.num_items_initial = options.items;
  config.latent_dim = options.latent_dim;
  config.days = options.days;
  config.events_per_day = options.events_per_day;
  config.drift_rate = options.drift_rate;
  config.churn_rate = options.churn_rate;
  config.context_dim = options.context_dim;
  config.label_bias = options.label_bias;
  config.validate();

  const EventStream events = generate(config);
  const fs::path out_path = resolve_output(options.out);
  write_events(events, out_path);

  ordered_json manifest_config;
  manifest_config["seed"] = options.seed;
  manifest_config["users"] = options.users;
  manifest_config["items"] = options.items;
  manifest_config["days"] = options.days;
  manifest_config["events_per_day"] = options.events_per_day;
  manifest_config["drift_rate"] = options.drift_rate;
  manifest_config["churn_rate"] = options.churn_rate;
  manifest_config["latent_dim"] = options.latent_dim;
  manifest_config["context_dim"] = options.context_dim;
  manifest_config["label_bias"] = options.label_bias;
  manifest_config["out"] = out_path.string();
  write_manifest(fs::path(out_path.string() + ".manifest.json"), "gen",
                 std::move(manifest_config), {}, {out_path});

  out << "wrote " << events.size() << " events to " << out_path.string() << '\n';
  return kOk;
}

// ------------------------------------------------------------- replay ----

struct ModelFlags {
  std::uint32_t dim = 16;
  double lr = 0.05;
  double l2 = 0.0;
  std::uint64_t buckets = 65536;
  bool double_hash = false;
  double init_scale = 0.05;
  std::uint64_t seed = 0;
};

void add_model_flags(CLI::App* cmd, ModelFlags& flags) {
  cmd->add_option("--dim", flags.dim, "embedding dimension")->capture_default_str();
  cmd->add_option("--lr", flags.lr, "SGD learning rate")->capture_default_str();
  cmd->add_option("--l2", flags.l2, "L2 regularization")->capture_default_str();
  cmd->add_option("--buckets", flags.buckets, "hash buckets per table")->capture_default_str();
  cmd->add_flag("--double-hash", flags.double_hash, "use two independent hash tables per side");
  cmd->add_option("--init-scale", flags.init_scale, "uniform init half-width")
      ->capture_default_str();
  cmd->add_option("--seed", flags.seed, "model seed")->capture_default_str();
}

ModelConfig model_config_from_flags(const ModelFlags& flags, std::uint32_t context_dim) {
  ModelConfig config;
  config.embedding_dim = flags.dim;
  config.learning_rate = static_cast<float>(flags.lr);
  config.l2_reg = static_cast<float>(flags.l2);
  config.context_dim = context_dim;
  config.init_scale = static_cast<float>(flags.init_scale);
  config.seed = flags.seed;
  const HashMode mode = flags.double_hash ? HashMode::kDouble : HashMode::kSingle;
  config.user_hash = {flags.buckets, mode, mix_seed(flags.seed, 0xA), mix_seed(flags.seed, 0xB)};
  config.item_hash = config.user_hash;
  config.validate();
  return config;
}

ordered_json model_flags_json(const ModelFlags& flags) {
  ordered_json j;
  j["dim"] = flags.dim;
  j["lr"] = flags.lr;
  j["l2"] = flags.l2;
  j["buckets"] = flags.buckets;
  j["double_hash"] = flags.double_hash;
  j["init_scale"] = flags.init_scale;
  j["seed"] = flags.seed;
  return j;
}

EventStream load_event_file(const std::string& raw_path) {
  const fs::path path(raw_path);
  if (!fs::exists(path)) {
    throw IoError("event file '" + path.string() + "' does not exist");
  }
  return read_events(path);
}

struct ReplayOptions {
  std::string events;
  std::string policy = "none";
  std::uint32_t window_days = 1;
  std::uint32_t cadence_days = 1;
  std::uint32_t epochs = 1;
  std::uint32_t pretrain_days = 0;
  std::string metrics_window = "per_day";
  ModelFlags model;
  std::string out_prefix = "replay";
  std::string save_model;
};

RetrainPolicy policy_from_replay_flags(const ReplayOptions& options) {
  RetrainPolicy policy;
  if (options.policy == "none") {
    policy.kind = PolicyKind::kNone;
  } else if (options.policy == "stateless") {
    policy.kind = PolicyKind::kStatelessWindow;
  } else if (options.policy == "stateful") {
    policy.kind = PolicyKind::kStatefulIncremental;
  } else if (options.policy == "online") {
    policy.kind = PolicyKind::kFullyOnline;
  } else {
    throw ConfigError("replay: unknown policy '" + options.policy +
                      "' (expected none|stateless|stateful|online)");
  }
  policy.window_days = options.window_days;
  policy.cadence_days = options.cadence_days;
  policy.epochs_per_retrain = options.epochs;
  policy.validate();
  return policy;
}

MetricsWindow metrics_window_from_flag(const std::string& text) {
  if (text == "per_day") return MetricsWindow::kPerDay;
  if (text == "cumulative") return MetricsWindow::kCumulative;
  throw ConfigError("metrics window must be per_day or cumulative, got '" + text + "'");
}

int run_replay(const ReplayOptions& options, std::ostream& out) {
  const EventStream events = load_event_file(options.events);
  const std::uint32_t context_dim =
      events.empty() ? 0 : static_cast<std::uint32_t>(events.front().context.size());

  ReplaySpec spec;
  spec.policy = policy_from_replay_flags(options);
  spec.pretrain_days = options.pretrain_days;
  spec.metrics_window = metrics_window_from_flag(options.metrics_window);

  const ModelConfig config = model_config_from_flags(options.model, context_dim);
  const ReplayReport report = replay(spec, config, events);

  const fs::path prefix = resolve_output(options.out_prefix);
  const fs::path csv_path = prefix.string() + ".csv";
  const fs::path json_path = prefix.string() + ".json";
  std::vector<fs::path> outputs = {csv_path, json_path};

  std::ostringstream csv;
  write_metrics_csv(report, csv);
  write_text_file(csv_path, csv.str());
  std::ostringstream summary;
  write_summary_json(report, summary);
  write_text_file(json_path, summary.str());
  if (!options.save_model.empty()) {
    const fs::path model_path = resolve_output(options.save_model);
    save_checkpoint(report.final_state, model_path);
    outputs.push_back(model_path);
  }

  ordered_json manifest_config;
  manifest_config["events"] = options.events;
  manifest_config["policy"] = report.policy_name;
  manifest_config["window_days"] = options.window_days;
  manifest_config["cadence_days"] = options.cadence_days;
  manifest_config["epochs"] = options.epochs;
  manifest_config["pretrain_days"] = options.pretrain_days;
  manifest_config["metrics_window"] = options.metrics_window;
  manifest_config["model"] = model_flags_json(options.model);
  manifest_config["out_prefix"] = prefix.string();
  manifest_config["save_model"] = options.save_model;
  write_manifest(fs::path(prefix.string() + ".manifest.json"), "replay",
                 std::move(manifest_config), {fs::path(options.events)}, outputs);

  out << "policy=" << report.policy_name;
  if (report.cumulative_auc) {
    out << " cumulative_auc=" << *report.cumulative_auc;
  } else {
    out << " cumulative_auc=NA";
  }
  out << " final_holdout_log_loss=" << report.final_holdout_log_loss
      << " total_example_updates=" << report.cost.total_example_updates
      << " retrain_sessions=" << report.cost.retrain_sessions << '\n';
  return kOk;
}

// ------------------------------------------------------------ compare ----

struct CompareOptions {
  std::string events;
  std::vector<std::string> policies;
  std::uint32_t pretrain_days = 0;
  ModelFlags model;
  std::string out = "compare.csv";
};

int run_compare(const CompareOptions& options, std::ostream& out) {
  if (options.policies.size() < 2) {
    throw ConfigError("compare: need at least two policies (--policies a,b,...)");
  }
  const EventStream events = load_event_file(options.events);
  const std::uint32_t context_dim =
      events.empty() ? 0 : static_cast<std::uint32_t>(events.front().context.size());
  const ModelConfig config = model_config_from_flags(options.model, context_dim);

  std::vector<ReplayReport> reports;
  reports.reserve(options.policies.size());
  for (const std::string& descriptor : options.policies) {
    ReplaySpec spec;
    spec.policy = parse_policy(descriptor);
    spec.pretrain_days = options.pretrain_days;
    reports.push_back(replay(spec, config, events));
    const ReplayReport& report = reports.back();
    out << "policy=" << report.policy_name;
    if (report.cumulative_auc) {
      out << " cumulative_auc=" << *report.cumulative_auc;
    } else {
      out << " cumulative_auc=NA";
    }
    out << " total_example_updates=" << report.cost.total_example_updates << '\n';
  }

  const std::vector<LiftRow> rows = lift_table(reports, 0);
  const fs::path out_path = resolve_output(options.out);
  std::ostringstream csv;
  write_lift_csv(rows, csv);
  write_text_file(out_path, csv.str());

  ordered_json manifest_config;
  manifest_config["events"] = options.events;
  manifest_config["policies"] = options.policies;
  manifest_config["pretrain_days"] = options.pretrain_days;
  manifest_config["model"] = model_flags_json(options.model);
  manifest_config["out"] = out_path.string();
  write_manifest(fs::path(out_path.string() + ".manifest.json"), "compare",
                 std::move(manifest_config), {fs::path(options.events)}, {out_path});
  return kOk;
}

// --------------------------------------------------------- collisions ----

struct CollisionsOptions {
  std::uint64_t num_ids = 0;
  std::string ids_file;
  std::string buckets = "500000,1000000,2000000,3000000,4000000";
  bool double_hash = false;
  std::uint64_t seed = 0;
  std::string out = "collisions.csv";
};

std::vector<std::string> synthesize_ids(std::uint64_t count, std::uint64_t seed) {
  std::vector<std::string> ids;
  ids.reserve(count);
  char buffer[40];
  for (std::uint64_t i = 0; i < count; ++i) {
    // Random-looking but distinct by construction (the counter suffix).
    std::snprintf(buffer, sizeof buffer, "%016llx-%llu",
                  static_cast<unsigned long long>(mix_seed(seed, i)),
                  static_cast<unsigned long long>(i));
    ids.emplace_back(buffer);
  }
  return ids;
}

std::vector<std::string> read_id_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("collisions: cannot open ids file '" + path.string() + "'");
  }
  std::vector<std::string> ids;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) {
      throw DataError(path.string() + ":" + std::to_string(line_number) + ": empty id");
    }
    ids.push_back(line);
  }
  return ids;
}

int run_collisions(const CollisionsOptions& options, std::ostream& out) {
  if (options.num_ids == 0 && options.ids_file.empty()) {
    throw ConfigError("collisions: one of --num-ids or --ids-file is required");
  }
  std::vector<std::string> ids;
  std::vector<fs::path> inputs;
  if (!options.ids_file.empty()) {
    const fs::path ids_path(options.ids_file);
    if (!fs::exists(ids_path)) {
      throw IoError("collisions: ids file '" + ids_path.string() + "' does not exist");
    }
    ids = read_id_file(ids_path);
    inputs.push_back(ids_path);
  } else {
    ids = synthesize_ids(options.num_ids, options.seed);
  }
  if (ids.empty()) {
    throw DataError("collisions: empty id set");
  }

  const std::vector<std::uint64_t> bucket_list = parse_bucket_list(options.buckets);
  HashConfig base;
  base.mode = options.double_hash ? HashMode::kDouble : HashMode::kSingle;
  base.seed_a = mix_seed(options.seed, 0xA);
  base.seed_b = mix_seed(options.seed, 0xB);
  const std::vector<CollisionReport> reports = collision_sweep(base, ids, bucket_list);

  std::ostringstream csv;
  csv << "buckets,mode,num_ids,empirical_rate,expected_rate\n";
  char buffer[40];
  for (const CollisionReport& report : reports) {
    csv << report.buckets << ',' << hash_mode_name(report.mode) << ',' << report.num_ids << ',';
    std::snprintf(buffer, sizeof buffer, "%.10g", report.collision_rate);
    csv << buffer << ',';
    std::snprintf(buffer, sizeof buffer, "%.10g", report.expected_rate);
    csv << buffer << '\n';
  }
  const fs::path out_path = resolve_output(options.out);
  write_text_file(out_path, csv.str());

  ordered_json manifest_config;
  manifest_config["num_ids"] = options.num_ids;
  manifest_config["ids_file"] = options.ids_file;
  manifest_config["buckets"] = options.buckets;
  manifest_config["double_hash"] = options.double_hash;
  manifest_config["seed"] = options.seed;
  manifest_config["out"] = out_path.string();
  write_manifest(fs::path(out_path.string() + ".manifest.json"), "collisions",
                 std::move(manifest_config), inputs, {out_path});

  out << "wrote " << reports.size() << " sweep rows to " << out_path.string() << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"odl: stateful online learning experiments for hashed-embedding recommenders"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(0, 1);

  GenOptions gen_options;
  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic drifting event stream");
  gen->add_option("--seed", gen_options.seed, "generator seed")->capture_default_str();
  gen->add_option("--users", gen_options.users, "number of users")->capture_default_str();
  gen->add_option("--items", gen_options.items, "initial item catalog size")
      ->capture_default_str();
  gen->add_option("--days", gen_options.days, "number of days")->capture_default_str();
  gen->add_option("--events-per-day", gen_options.events_per_day, "events per day")
      ->capture_default_str();
  gen->add_option("--drift-rate", gen_options.drift_rate, "per-day latent random-walk std")
      ->capture_default_str();
  gen->add_option("--churn-rate", gen_options.churn_rate, "per-day item catalog churn fraction")
      ->capture_default_str();
  gen->add_option("--latent-dim", gen_options.latent_dim, "ground-truth latent dimension")
      ->capture_default_str();
  gen->add_option("--context-dim", gen_options.context_dim, "context feature dimension")
      ->capture_default_str();
  gen->add_option("--label-bias", gen_options.label_bias, "logit offset of the label process")
      ->capture_default_str();
  gen->add_option("--out", gen_options.out, "output event-log path (JSON lines)")->required();

  ReplayOptions replay_options;
  CLI::App* replay_cmd =
      app.add_subcommand("replay", "prequential replay of one retraining policy");
  replay_cmd->add_option("--events", replay_options.events, "input event-log file")->required();
  replay_cmd->add_option("--policy", replay_options.policy, "none|stateless|stateful|online")
      ->required();
  replay_cmd->add_option("--window-days", replay_options.window_days, "stateless window")
      ->capture_default_str();
  replay_cmd->add_option("--cadence-days", replay_options.cadence_days, "retrain cadence")
      ->capture_default_str();
  replay_cmd->add_option("--epochs", replay_options.epochs, "passes per retrain session")
      ->capture_default_str();
  replay_cmd->add_option("--pretrain-days", replay_options.pretrain_days,
                         "days of offline pre-training before the fine-tune span")
      ->capture_default_str();
  replay_cmd
      ->add_option("--metrics-window", replay_options.metrics_window, "per_day|cumulative")
      ->capture_default_str();
  add_model_flags(replay_cmd, replay_options.model);
  replay_cmd->add_option("--out-prefix", replay_options.out_prefix,
                         "prefix for .csv/.json/.manifest.json outputs")
      ->capture_default_str();
  replay_cmd->add_option("--save-model", replay_options.save_model,
                         "write the final model checkpoint here");

  CompareOptions compare_options;
  CLI::App* compare =
      app.add_subcommand("compare", "replay several policies and emit a lift table");
  compare->add_option("--events", compare_options.events, "input event-log file")->required();
  compare
      ->add_option("--policies", compare_options.policies,
                   "comma-separated policy descriptors; first is the baseline")
      ->required()
      ->delimiter(',');
  compare->add_option("--pretrain-days", compare_options.pretrain_days, "shared pre-train span")
      ->capture_default_str();
  add_model_flags(compare, compare_options.model);
  compare->add_option("--out", compare_options.out, "lift table CSV path")->capture_default_str();

  CollisionsOptions collisions_options;
  CLI::App* collisions =
      app.add_subcommand("collisions", "measure hash collision rates over bucket counts");
  collisions->add_option("--num-ids", collisions_options.num_ids, "synthesize this many ids");
  collisions->add_option("--ids-file", collisions_options.ids_file, "read ids one per line");
  collisions->add_option("--buckets", collisions_options.buckets, "comma-separated bucket counts")
      ->capture_default_str();
  collisions->add_flag("--double", collisions_options.double_hash, "double hashing mode");
  collisions->add_option("--seed", collisions_options.seed, "hash/id seed")
      ->capture_default_str();
  collisions->add_option("--out", collisions_options.out, "output CSV path")
      ->capture_default_str();

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("odl");
  for (const std::string& arg : args) {
    argv.push_back(arg.c_str());
  }

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    err << "run 'odl --help' for usage\n";
    return kUsage;
  }

  try {
    if (app.got_subcommand(gen)) return run_gen(gen_options, out);
    if (app.got_subcommand(replay_cmd)) return run_replay(replay_options, out);
    if (app.got_subcommand(compare)) return run_compare(compare_options, out);
    if (app.got_subcommand(collisions)) return run_collisions(collisions_options, out);
    out << app.help();
    return kOk;
  } catch (const ConfigError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << '\n';
    return kIo;
  }
}

}  // namespace odl::cli
