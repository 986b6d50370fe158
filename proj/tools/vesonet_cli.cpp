#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "vesonet/audit.hpp"
#include "vesonet/error.hpp"
#include "vesonet/sim.hpp"
#include "vesonet/synthetic.hpp"

namespace fs = std::filesystem;
using namespace vesonet;

namespace {

enum Exit { kOk = 0, kInvalid = 1, kRuntime = 2, kMismatch = 3 };

struct Options {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::string policy;
  std::string axis;
  std::string values;
  int seeds = 1;
  // gen-log
  int users = 200, items = 200, clusters = 2, history = 20;
  double intra = 0.9;
  // audit
  std::string log;
  std::string metrics;
};

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("vesonet");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("VESONET_LOG")) {
    const auto level = spdlog::level::from_str(env);
    if (level != spdlog::level::off || std::string(env) == "off") spdlog::set_level(level);
    else spdlog::warn("VESONET_LOG={} not understood; using warn", env);
  }
}

std::ofstream open_out(const Options& o, const std::string& name) {
  fs::create_directories(o.out);
  const fs::path p = fs::path(o.out) / name;
  std::ofstream f(p);
  if (!f) throw ConfigError("cannot write " + p.string());
  spdlog::info("writing {}", p.string());
  return f;
}

/// Loads and validates --config (defaults when absent), applying --seed and --policy.
/// Returns nullopt after printing every problem.
std::optional<Scenario> load(const Options& o) {
  Scenario s;
  std::vector<std::string> errors;
  if (!o.config.empty()) {
    try {
      ScenarioLoad l = load_scenario_file(o.config);
      s = std::move(l.scenario);
      errors = std::move(l.errors);
    } catch (const ParseError& e) {
      std::cerr << o.config << ":" << e.line << ":" << e.column << ": " << e.what() << "\n";
      return std::nullopt;
    }
  }
  if (o.seed) s.rng_seed = *o.seed;
  if (!o.policy.empty()) {
    if (auto p = policy_from_string(o.policy)) s.policy = *p;
    else errors.push_back("--policy: expected vesonet or baseline, got `" + o.policy + "`");
  }
  for (const auto& e : validate_scenario(s)) errors.push_back(e);
  if (!errors.empty()) {
    for (const auto& e : errors) std::cerr << (o.config.empty() ? "scenario" : o.config) << ": " << e << "\n";
    return std::nullopt;
  }
  return s;
}

int cmd_validate(const Options& o) {
  if (o.config.empty()) {
    std::cerr << "validate needs --config\n";
    return kInvalid;
  }
  if (!load(o)) return kInvalid;
  std::cout << o.config << ": ok\n";
  return kOk;
}

int cmd_gen_scenario(const Options& o) {
  Scenario s;
  if (o.seed) s.rng_seed = *o.seed;
  if (!o.policy.empty()) {
    const auto p = policy_from_string(o.policy);
    if (!p) {
      std::cerr << "--policy: expected vesonet or baseline\n";
      return kInvalid;
    }
    s.policy = *p;
  }
  open_out(o, "scenario.json") << scenario_to_json(s);
  return kOk;
}

int cmd_gen_log(const Options& o) {
  LogSpec spec;
  spec.users = o.users;
  spec.items = o.items;
  spec.clusters = o.clusters;
  spec.history_length = o.history;
  spec.intra_probability = o.intra;
  if (o.seed) spec.seed = *o.seed;
  if (spec.users <= 0 || spec.items <= 1 || spec.clusters <= 0 || spec.history_length < 1 || spec.intra_probability < 0 ||
      spec.intra_probability > 1) {
    std::cerr << "gen-log: counts must be positive and --intra must lie in [0, 1]\n";
    return kInvalid;
  }
  const PlantedLog planted = gen_log(spec);
  auto log = open_out(o, "consumption.csv");
  write_consumption_csv(log, planted.log);
  auto labels = open_out(o, "clusters.csv");
  write_cluster_labels_csv(labels, planted);
  return kOk;
}

int cmd_run(const Options& o) {
  const auto s = load(o);
  if (!s) return kInvalid;
  spdlog::info("running {} ticks, policy {}, seed {}", s->run_length_ticks, to_string(s->policy), s->rng_seed);
  const RunResult r = run(*s);
  auto events = open_out(o, "events.csv");
  write_event_log_csv(events, r.events);
  auto metrics = open_out(o, "metrics.csv");
  write_metrics_csv(metrics, r.report);
  if (s->policy == Policy::vesonet) {
    auto curve = open_out(o, "rl_curve.csv");
    write_training_curve_csv(curve, r.rl_curve);
  }
  write_metrics_csv(std::cout, r.report);
  return kOk;
}

int cmd_sweep(const Options& o) {
  auto s = load(o);
  if (!s) return kInvalid;
  const auto axis = axis_from_string(o.axis);
  if (!axis) {
    std::cerr << "--axis: expected velocity, density, rsu_count, accidents or request_rate\n";
    return kInvalid;
  }
  std::vector<double> values;
  std::stringstream ss(o.values);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      std::cerr << "--values: `" << item << "` is not a number\n";
      return kInvalid;
    }
  }
  std::vector<Policy> policies;
  if (!o.policy.empty()) policies.push_back(s->policy);
  spdlog::info("sweep over {} values, {} seeds, {} jobs", values.size(), o.seeds, o.jobs);
  const auto rows = sweep(*s, *axis, values, o.seeds, o.jobs, policies);
  auto out = open_out(o, "sweep.csv");
  write_sweep_csv(out, rows);
  write_sweep_csv(std::cout, rows);
  return kOk;
}

int cmd_train_rl(const Options& o) {
  auto s = load(o);
  if (!s) return kInvalid;
  s->policy = Policy::vesonet;
  World world(*s);
  world.finish();
  const DQNAgent* agent = world.agent();
  if (!agent) {
    std::cerr << "train-rl: the scenario has no provider vehicles\n";
    return kInvalid;
  }
  auto curve = open_out(o, "rl_curve.csv");
  write_training_curve_csv(curve, agent->curve());
  auto ckpt = open_out(o, "qnet.csv");
  agent->save(ckpt);
  std::cout << "training steps: " << agent->curve().size() << "\n";
  if (!agent->curve().empty()) std::cout << "final loss: " << agent->curve().back().loss << "\n";
  return kOk;
}

int cmd_train_embed(const Options& o) {
  const auto s = load(o);
  if (!s) return kInvalid;
  ConsumptionLog log;
  if (!s->consumption_log.empty()) {
    fs::path p = s->consumption_log;
    if (p.is_relative() && !s->base_dir.empty()) p = fs::path(s->base_dir) / p;
    std::ifstream in(p);
    log = read_consumption_csv(in);
  } else {
    log = gen_log(s->synthetic).log;
  }
  const ContentGraph graph = build_content_graph(log, 1);
  const EmbeddingModel model = train_embeddings(graph, s->embedding);
  auto out = open_out(o, "embedding.csv");
  write_embedding_csv(out, model);
  std::cout << "items: " << model.size() << ", dimension: " << model.dimension() << "\n";
  return kOk;
}

int cmd_audit(const Options& o) {
  if (o.log.empty()) {
    std::cerr << "audit needs --log\n";
    return kInvalid;
  }
  double tick_s = 1.0;
  if (!o.config.empty()) {
    const auto s = load(o);
    if (!s) return kInvalid;
    tick_s = s->tick_duration_s;
  }
  std::ifstream in(o.log);
  if (!in) {
    std::cerr << "cannot read " << o.log << "\n";
    return kRuntime;
  }
  const audit::AuditReport rep = audit::audit_event_log(in);
  audit::write_audit(std::cout, rep, tick_s);
  int code = rep.clean() ? kOk : kMismatch;
  if (!o.metrics.empty()) {
    std::ifstream m(o.metrics);
    if (!m) {
      std::cerr << "cannot read " << o.metrics << "\n";
      return kRuntime;
    }
    const auto mismatches = audit::compare_with_runner(rep, tick_s, m);
    for (const auto& line : mismatches) std::cerr << "mismatch: " << line << "\n";
    if (!mismatches.empty()) code = kMismatch;
    else std::cout << "# runner report reproduced\n";
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Social-aware vehicular content caching simulator"};
  app.require_subcommand(1);
  Options o;

  auto common = [&o](CLI::App* c) {
    c->add_option("--config", o.config, "Scenario JSON file");
    c->add_option("--out", o.out, "Output directory")->capture_default_str();
    c->add_option("--seed", o.seed, "Override the scenario seed");
    c->add_option("--policy", o.policy, "vesonet or baseline (baseline_no_reroute)");
  };

  auto* validate = app.add_subcommand("validate", "Check a scenario file and list every problem");
  validate->add_option("--config", o.config, "Scenario JSON file")->required();
  auto* gen_scenario = app.add_subcommand("gen-scenario", "Write the default scenario as JSON");
  common(gen_scenario);
  auto* gen_log_cmd = app.add_subcommand("gen-log", "Write a planted-cluster consumption log and its labels");
  gen_log_cmd->add_option("--out", o.out, "Output directory")->capture_default_str();
  gen_log_cmd->add_option("--seed", o.seed, "Generator seed");
  gen_log_cmd->add_option("--users", o.users)->capture_default_str();
  gen_log_cmd->add_option("--items", o.items)->capture_default_str();
  gen_log_cmd->add_option("--clusters", o.clusters)->capture_default_str();
  gen_log_cmd->add_option("--history", o.history, "Records per user")->capture_default_str();
  gen_log_cmd->add_option("--intra", o.intra, "Probability a pick stays in the user's cluster")->capture_default_str();
  auto* run_cmd = app.add_subcommand("run", "Run one simulation");
  common(run_cmd);
  auto* sweep_cmd = app.add_subcommand("sweep", "Run one simulation per axis value, policy and seed");
  common(sweep_cmd);
  sweep_cmd->add_option("--axis", o.axis, "velocity, density, rsu_count, accidents or request_rate")->required();
  sweep_cmd->add_option("--values", o.values, "Comma-separated axis values")->required();
  sweep_cmd->add_option("--seeds", o.seeds, "Seeds per point (seed, seed+1, ...)")->capture_default_str();
  sweep_cmd->add_option("--jobs", o.jobs, "Parallel runs")->capture_default_str();
  auto* train_rl = app.add_subcommand("train-rl", "Train the provider policy over one run and save it");
  common(train_rl);
  auto* train_embed = app.add_subcommand("train-embed", "Train content embeddings from the scenario's log");
  common(train_embed);
  auto* audit_cmd = app.add_subcommand("audit", "Recompute metrics from an event log and check invariants");
  audit_cmd->add_option("--log", o.log, "Event log CSV")->required();
  audit_cmd->add_option("--metrics", o.metrics, "Runner metrics CSV to compare against");
  audit_cmd->add_option("--config", o.config, "Scenario (for the tick duration)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kInvalid;
  }

  try {
    if (*validate) return cmd_validate(o);
    if (*gen_scenario) return cmd_gen_scenario(o);
    if (*gen_log_cmd) return cmd_gen_log(o);
    if (*run_cmd) return cmd_run(o);
    if (*sweep_cmd) return cmd_sweep(o);
    if (*train_rl) return cmd_train_rl(o);
    if (*train_embed) return cmd_train_embed(o);
    if (*audit_cmd) return cmd_audit(o);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kRuntime;
}
