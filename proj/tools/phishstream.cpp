// phishstream command-line tool: generate synthetic streams, dump features,
// train, evaluate, run ablations and snapshot node state.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "phishstream/checkpoint.hpp"
#include "phishstream/datagen.hpp"
#include "phishstream/features.hpp"
#include "phishstream/ingest.hpp"
#include "phishstream/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace phishstream;

namespace {

struct Options {
  std::string events;
  std::string labels;
  std::string out = "out";
  std::string checkpoint;
  std::uint64_t seed = TrainConfig{}.seed;
  bool seed_set = false;
  int epochs = TrainConfig{}.epochs;
  double lr = TrainConfig{}.learning_rate;
  long dim = EngineConfig{}.dim;
  std::size_t storage_len = EngineConfig{}.storage_len;
  std::size_t broadcast_k = EngineConfig{}.broadcast_k;
  double decay_gamma = EngineConfig{}.decay_gamma;
  std::string threshold_policy = "youden";
  std::string attention_source = "matrix";
  bool disable_decay = false;
  bool disable_broadcast = false;
  bool disable_storage = false;
  bool strict_order = false;
  double positive_weight = TrainConfig{}.positive_weight;
  double grad_clip = TrainConfig{}.grad_clip;
  double feature_clip = NormalizeOptions{}.clip;
  GenConfig gen;
};

// What a command echoes into its manifest.
struct Outcome {
  json config;
  json extra = json::object();
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

TrainConfig train_config(const Options& o) {
  TrainConfig c;
  c.engine.dim = o.dim;
  c.engine.storage_len = o.storage_len;
  c.engine.broadcast_k = o.broadcast_k;
  c.engine.decay_gamma = o.decay_gamma;
  if (o.attention_source == "matrix") {
    c.engine.attention_source = AttentionSource::kDecayedMatrix;
  } else if (o.attention_source == "mean") {
    c.engine.attention_source = AttentionSource::kMeanVector;
  } else {
    throw UsageError("--attention-source must be 'matrix' or 'mean'");
  }
  c.engine.disable_decay = o.disable_decay;
  c.engine.disable_broadcast = o.disable_broadcast;
  c.engine.disable_storage = o.disable_storage;
  c.learning_rate = o.lr;
  c.epochs = o.epochs;
  c.seed = o.seed;
  c.positive_weight = o.positive_weight;
  c.grad_clip = o.grad_clip;
  try {
    c.threshold = ThresholdPolicy::parse(o.threshold_policy);
    c.validate();
  } catch (const InvalidConfig& e) {
    throw UsageError(e.what());
  }
  return c;
}

json config_echo(const Options& o) {
  return {{"events", o.events},
          {"labels", o.labels},
          {"out", o.out},
          {"checkpoint", o.checkpoint},
          {"seed", o.seed},
          {"epochs", o.epochs},
          {"lr", o.lr},
          {"dim", o.dim},
          {"storage_len", o.storage_len},
          {"broadcast_k", o.broadcast_k},
          {"decay_gamma", o.decay_gamma},
          {"threshold_policy", o.threshold_policy},
          {"attention_source", o.attention_source},
          {"disable_decay", o.disable_decay},
          {"disable_broadcast", o.disable_broadcast},
          {"disable_storage", o.disable_storage},
          {"strict_order", o.strict_order},
          {"positive_weight", o.positive_weight},
          {"grad_clip", o.grad_clip},
          {"feature_clip", o.feature_clip}};
}

void require_path(const std::string& value, const std::string& flag) {
  if (value.empty()) throw UsageError(flag + " is required");
  if (!fs::exists(value)) throw UsageError(flag + ": file not found: " + value);
}

fs::path prepare_out(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw UsageError("--out: cannot create directory " + out);
  return fs::path(out);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
}

void write_manifest(const fs::path& dir, const std::string& command, json config,
                    double wall_seconds, json extra = json::object()) {
  json m;
  m["command"] = command;
  m["config"] = std::move(config);
  m["seed"] = m["config"].value("seed", json());
  m["versions"] = {{"phishstream", PHISHSTREAM_VERSION},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                 std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"compiler", __VERSION__}};
  m["wall_time_s"] = wall_seconds;
  for (auto& [k, v] : extra.items()) m[k] = v;
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

struct LoadedStream {
  EventStream stream;
  IngestReport report;
  FeatureAudit audit;
};

LoadedStream load_stream(const Options& o) {
  require_path(o.events, "--events");
  LoadedStream s;
  StreamOptions so;
  so.strict_order = o.strict_order;
  s.stream = stream_events_from_files({o.events}, so, &s.report);
  NormalizeOptions no;
  no.clip = o.feature_clip;
  s.audit = featurize_stream(s.stream, no);
  if (s.report.malformed > 0) {
    std::cerr << "warning: skipped " << s.report.malformed << " malformed records in " << o.events
              << "\n";
  }
  return s;
}

json ingest_json(const IngestReport& r) {
  return {{"lines_read", r.lines_read},
          {"accepted", r.accepted},
          {"malformed", r.malformed},
          {"errors", r.errors}};
}

NodeLabels load_node_labels(const Options& o, const EventStream& stream) {
  require_path(o.labels, "--labels");
  return build_node_labels(stream, load_labels(o.labels));
}

CheckpointMeta meta_of(const TrainConfig& c, double positive_weight) {
  CheckpointMeta m;
  m.seed = c.seed;
  m.engine = c.engine;
  m.learning_rate = c.learning_rate;
  m.epochs = static_cast<std::uint32_t>(c.epochs);
  m.positive_weight = positive_weight;
  return m;
}

json epoch_line(const EpochResult& e, const EvalReport& r) {
  return {{"epoch", e.epoch},
          {"split", r.split},
          {"auc", r.auc},
          {"tpr", r.tpr},
          {"fpr", r.fpr},
          {"threshold", to_json(r)["threshold"]},
          {"loss_mean", e.loss_mean}};
}

Outcome cmd_gen(const Options& o) {
  const auto dir = prepare_out(o.out);
  GenConfig g = o.gen;
  if (o.seed_set) g.seed = o.seed;
  GeneratedStream s;
  try {
    s = generate_stream(g);
  } catch (const InvalidConfig& e) {
    throw UsageError(e.what());
  }
  {
    std::ofstream tx(dir / "tx.csv");
    write_transactions(tx, s.records);
    std::ofstream labels(dir / "labels.csv");
    write_labels(labels, s.labels);
    if (!tx || !labels) throw Error("cannot write generator output to " + dir.string());
  }
  json info = {{"records", s.records.size()},
               {"events", s.event_count},
               {"phishing", s.labels.phishing_count()},
               {"non_phishing", s.labels.non_phishing_count()}};
  std::cout << info.dump() << "\n";
  return {to_json(g), {{"output", info}}};
}

Outcome cmd_features_dump(const Options& o) {
  const auto dir = prepare_out(o.out);
  const auto s = load_stream(o);
  std::ofstream f(dir / "features.csv");
  write_feature_dump(f, s.stream);
  if (!f) throw Error("cannot write " + (dir / "features.csv").string());
  return {config_echo(o), {{"ingest", ingest_json(s.report)}}};
}

Outcome cmd_train(const Options& o) {
  const auto config = train_config(o);
  const auto dir = prepare_out(o.out);
  const auto s = load_stream(o);
  const auto labels = load_node_labels(o, s.stream);
  const auto result = train_run(s.stream, labels, config);

  std::string lines;
  for (const auto& e : result.epochs) {
    for (const auto* r : {&e.val, &e.test}) {
      const auto line = epoch_line(e, *r).dump();
      std::cout << line << "\n";
      lines += line + "\n";
    }
  }
  write_text(dir / "epochs.jsonl", lines);
  json metrics = {{"best_epoch", result.best_epoch},
                  {"positive_weight", result.positive_weight},
                  {"parameter_count", ModelParams::parameter_count(config.engine.dim)},
                  {"val", to_json(result.best().val)},
                  {"test", to_json(result.best().test)}};
  write_text(dir / "metrics.json", metrics.dump(2) + "\n");
  save_checkpoint_file((dir / "checkpoint.bin").string(), result.params,
                       meta_of(config, result.positive_weight));
  return {config_echo(o), {{"ingest", ingest_json(s.report)}}};
}

Outcome cmd_eval(const Options& o) {
  require_path(o.checkpoint, "--checkpoint");
  auto config = train_config(o);
  const auto ck = load_checkpoint_file(o.checkpoint);
  config.engine = ck.meta.engine;
  const auto dir = prepare_out(o.out);
  const auto s = load_stream(o);
  const auto labels = load_node_labels(o, s.stream);
  const auto outcome = evaluate(s.stream, labels, ck.params, config);
  const auto report = to_json(outcome.test);
  std::cout << report.dump() << "\n";
  write_text(dir / "eval.json", report.dump(2) + "\n");
  write_text(dir / "eval_val.json", to_json(outcome.val).dump(2) + "\n");
  return {config_echo(o), {{"ingest", ingest_json(s.report)}}};
}

Outcome cmd_ablate(const Options& o) {
  const auto config = train_config(o);
  const auto dir = prepare_out(o.out);
  const auto s = load_stream(o);
  const auto labels = load_node_labels(o, s.stream);
  const auto entries = run_ablation(s.stream, labels, config);
  json table = json::array();
  for (const auto& e : entries) {
    auto r = to_json(e.result.best().test);
    r["config"] = e.name;
    r["val_auc"] = e.result.best().val.auc;
    r["best_epoch"] = e.result.best_epoch;
    table.push_back(std::move(r));
  }
  std::cout << table.dump() << "\n";
  write_text(dir / "ablation.json", table.dump(2) + "\n");
  return {config_echo(o), {{"ingest", ingest_json(s.report)}}};
}

Outcome cmd_state_snapshot(const Options& o) {
  auto config = train_config(o);
  ModelParams params;
  if (!o.checkpoint.empty()) {
    require_path(o.checkpoint, "--checkpoint");
    auto ck = load_checkpoint_file(o.checkpoint);
    config.engine = ck.meta.engine;
    params = std::move(ck.params);
  } else {
    params = ModelParams::initialize(config.engine.dim, config.seed);
  }
  const auto dir = prepare_out(o.out);
  const auto s = load_stream(o);
  StreamEngine engine(config.engine);
  for (const auto& ev : s.stream) engine.process(ev, params);
  std::ofstream f(dir / "state.json");
  write_state_snapshot(f, engine.state());
  if (!f) throw Error("cannot write " + (dir / "state.json").string());
  return {config_echo(o), {{"ingest", ingest_json(s.report)}}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming phishing-account detection over transaction event streams"};
  app.set_config("--config", "", "Flat key=value config file; flags override its values");
  app.fallthrough();
  app.require_subcommand(1);

  Options o;
  app.add_option("--events", o.events, "Transaction CSV/TSV (11 columns)");
  app.add_option("--labels", o.labels, "Label CSV (address,label)");
  app.add_option("--out", o.out, "Output directory")->capture_default_str();
  app.add_option("--checkpoint", o.checkpoint, "Model checkpoint for eval / state snapshot");
  app.add_option_function<std::uint64_t>(
      "--seed", [&o](std::uint64_t v) { o.seed = v; o.seed_set = true; },
      "Random seed (gen defaults to 7, training to 42)");
  app.add_option("--epochs", o.epochs, "Training epochs")->capture_default_str();
  app.add_option("--lr", o.lr, "Learning rate")->capture_default_str();
  app.add_option("--dim", o.dim, "Embedding dimension (multiple of 3)")->capture_default_str();
  app.add_option("--storage-len", o.storage_len, "Storage queue capacity m")->capture_default_str();
  app.add_option("--broadcast-k", o.broadcast_k, "Recent neighbors per endpoint receiving a broadcast")
      ->capture_default_str();
  app.add_option("--decay-gamma", o.decay_gamma, "Geometric decay ratio")->capture_default_str();
  app.add_option("--threshold-policy", o.threshold_policy, "youden | fixed:<x>")
      ->capture_default_str();
  app.add_option("--attention-source", o.attention_source, "matrix | mean")->capture_default_str();
  app.add_flag("--disable-decay", o.disable_decay, "Uniform storage weights");
  app.add_flag("--disable-broadcast", o.disable_broadcast, "Deliver only to the two endpoints");
  app.add_flag("--disable-storage", o.disable_storage, "Attend over a single zero row");
  app.add_flag("--strict-order", o.strict_order, "Fail on out-of-order input");
  app.add_option("--positive-weight", o.positive_weight, "Phishing class weight (0 = auto)")
      ->capture_default_str();
  app.add_option("--grad-clip", o.grad_clip, "Per-step gradient norm cap (0 = off)")
      ->capture_default_str();
  app.add_option("--feature-clip", o.feature_clip, "Clamp for normalized features (0 = off)")
      ->capture_default_str();
  app.add_option("--n-nodes", o.gen.n_nodes, "gen: account count")->capture_default_str();
  app.add_option("--n-events", o.gen.n_events, "gen: event count")->capture_default_str();
  app.add_option("--n-phishing", o.gen.n_phishing, "gen: planted phishing accounts")
      ->capture_default_str();
  app.add_option("--n-decoys", o.gen.n_decoys, "gen: legitimate burst accounts")
      ->capture_default_str();
  app.add_option("--n-light-users", o.gen.n_light_users, "gen: low-activity depositor pool")
      ->capture_default_str();
  app.add_option("--burst-size", o.gen.burst_size, "gen: depositors per burst")
      ->capture_default_str();
  app.add_option("--funnel-delay", o.gen.funnel_delay, "gen: max seconds from deposit to sweep")
      ->capture_default_str();
  app.add_option("--campaigns", o.gen.campaigns, "gen: bursts per burst account")
      ->capture_default_str();

  auto* gen = app.add_subcommand("gen", "Write a synthetic stream (tx.csv, labels.csv)");
  auto* features = app.add_subcommand("features", "Feature utilities");
  auto* dump = features->add_subcommand("dump", "Write raw and normalized edge features");
  features->require_subcommand(1);
  auto* train = app.add_subcommand("train", "Train and write epochs.jsonl, metrics.json, checkpoint");
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint, write eval.json");
  auto* ablate = app.add_subcommand("ablate", "Run the four ablation configurations");
  auto* state = app.add_subcommand("state", "Node state utilities");
  auto* snapshot = state->add_subcommand("snapshot", "Replay the stream and write state.json");
  state->require_subcommand(1);
  for (auto* sub : {gen, features, dump, train, eval, ablate, state, snapshot}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const auto started = std::chrono::steady_clock::now();
  try {
    std::string command;
    Outcome outcome;
    if (*gen) {
      command = "gen";
      outcome = cmd_gen(o);
    } else if (*dump) {
      command = "features dump";
      outcome = cmd_features_dump(o);
    } else if (*train) {
      command = "train";
      outcome = cmd_train(o);
    } else if (*eval) {
      command = "eval";
      outcome = cmd_eval(o);
    } else if (*ablate) {
      command = "ablate";
      outcome = cmd_ablate(o);
    } else if (*snapshot) {
      command = "state snapshot";
      outcome = cmd_state_snapshot(o);
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    write_manifest(fs::path(o.out), command, std::move(outcome.config), wall,
                   std::move(outcome.extra));
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
