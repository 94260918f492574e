// Command-line entry point: train, eval, ablate, verify-igm, replay.
//
// Exit codes
//   0  success
//   1  verify-igm found a failure outside the sufficiency section, or an unexpected error
//   2  bad usage, schema violation, unreadable input or malformed trace
//   3  training aborted on a non-finite loss or gradient
//   4  checkpoint format version mismatch or incompatible checkpoint
//   5  verify-igm sufficiency failure (witnesses are printed)

#include "tomac/env/trace.hpp"
#include "tomac/igm/lab.hpp"
#include "tomac/train/trainer.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

namespace fs = std::filesystem;
using namespace tomac;
using train::json;

namespace
{

constexpr int kRunSchemaVersion = 1;

struct UsageError : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

json read_json_file(const fs::path & path)
{
  std::ifstream in(path);
  if (!in) {
    throw UsageError("cannot open config file " + path.string());
  }
  try {
    return json::parse(in);
  } catch (const json::parse_error & e) {
    throw UsageError(path.string() + ": " + e.what());
  }
}

// Accepts a bare training config or a resolved-config.json from an earlier run.
train::TrainConfig load_config(const fs::path & path)
{
  json j = read_json_file(path);
  if (j.is_object() && j.contains("schema_version")) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it.key() != "schema_version" && it.key() != "subcommand" && it.key() != "paths" && it.key() != "train") {
        throw train::ConfigError(it.key(), "unknown key");
      }
    }
    if (!j["schema_version"].is_number_integer() || j["schema_version"].get<int>() != kRunSchemaVersion) {
      throw train::ConfigError("schema_version", "expected " + std::to_string(kRunSchemaVersion));
    }
    if (!j.contains("train")) {
      throw train::ConfigError("train", "missing");
    }
    return train::config_from_json(j["train"]);
  }
  return train::config_from_json(j);
}

void write_json(const fs::path & path, const json & j)
{
  std::ofstream out(path);
  if (!out) {
    throw UsageError("cannot write " + path.string());
  }
  out << j.dump(2) << '\n';
}

struct TrainArgs
{
  std::string config;
  std::string out = "run";
  std::optional<std::uint64_t> seed;
  std::optional<int> episodes;
  std::optional<int> eval_every;
  std::optional<int> eval_episodes;
  bool wall_clock = false;
  int log_every = 500;
};

void add_train_options(CLI::App & cmd, TrainArgs & a)
{
  cmd.add_option("--config", a.config, "training config (JSON)")->required();
  cmd.add_option("--out", a.out, "output directory")->capture_default_str();
  cmd.add_option("--seed", a.seed, "override the config seed");
  cmd.add_option("--episodes", a.episodes, "override the episode count");
  cmd.add_option("--eval-every", a.eval_every, "greedy evaluation period in episodes");
  cmd.add_option("--eval-episodes", a.eval_episodes, "episodes per greedy evaluation");
  cmd.add_flag("--wall-clock", a.wall_clock, "record wall-clock seconds in the metrics");
  cmd.add_option("--log-every", a.log_every, "progress line period on stderr (0: silent)")->capture_default_str();
}

int run_training(const TrainArgs & a, const std::optional<std::string> & variant)
{
  train::TrainConfig config = load_config(a.config);
  if (a.seed) {config.seed = *a.seed;}
  if (a.episodes) {config.episodes = *a.episodes;}
  if (a.eval_every) {config.eval_every = *a.eval_every;}
  if (a.eval_episodes) {config.eval_episodes = *a.eval_episodes;}
  if (a.wall_clock) {config.record_wall_clock = true;}
  if (variant) {
    config.variant = *variant;
    if (*variant == "mac-jert" || *variant == "both") {config.buffer = train::BufferKind::MacJert;}
    if (*variant == "no-atpg" || *variant == "both") {config.atpg = false;}
  }
  train::validate(config);

  const fs::path out = fs::absolute(a.out);
  fs::create_directories(out);
  train::TrainOutputs outputs{out / "metrics.jsonl", out / "metrics.csv", out / "checkpoint"};
  json resolved;
  resolved["schema_version"] = kRunSchemaVersion;
  resolved["subcommand"] = variant ? "ablate" : "train";
  resolved["paths"] = {
    {"config", fs::absolute(a.config).string()}, {"out", out.string()},
    {"metrics_jsonl", outputs.metrics_jsonl.string()}, {"metrics_csv", outputs.metrics_csv.string()},
    {"checkpoint", outputs.checkpoint_dir.string()}};
  resolved["train"] = train::to_json(config);
  write_json(out / "resolved-config.json", resolved);

  const int log_every = a.log_every;
  auto progress = [log_every](const train::MetricsRow & r) {
      if (log_every > 0 && (r.episode + 1) % log_every == 0) {
        std::cerr << "episode " << r.episode + 1 << "  return " << r.train_return << "  epsilon "
                  << std::setprecision(3) << r.epsilon;
        if (r.eval_mean) {std::cerr << "  eval " << *r.eval_mean;}
        std::cerr << '\n';
      }
    };
  const train::TrainResult result = train::train(config, outputs, progress);
  const train::MetricsRow & last = result.metrics.back();
  std::cout << "trained " << config.episodes << " episodes (" << config.variant << ")";
  if (last.eval_mean) {
    std::cout << ", final greedy return " << *last.eval_mean << " +/- " << *last.eval_std;
  }
  std::cout << "\noutputs in " << out.string() << '\n';
  return 0;
}

struct EvalArgs
{
  std::string checkpoint;
  int episodes = 10;
  std::uint64_t seed = 0;
  std::string out = "eval.json";
  std::string trace;
};

int run_eval(const EvalArgs & a)
{
  if (!fs::exists(a.checkpoint)) {
    throw UsageError("no checkpoint at " + a.checkpoint);
  }
  const train::LoadedPolicy policy = train::load_policy(a.checkpoint);
  const train::EvalStats stats =
    train::evaluate(policy.params, policy.model, policy.config.env, a.episodes, a.seed);
  std::cout << std::fixed << std::setprecision(3)
            << "episodes  " << stats.episodes << '\n'
            << "mean      " << stats.mean << '\n'
            << "std       " << stats.std << '\n'
            << "min       " << stats.min << '\n'
            << "max       " << stats.max << '\n';
  json j = train::eval_json(stats);
  j["seed"] = a.seed;
  j["env"] = train::to_json(policy.config)["env"];
  write_json(a.out, j);

  if (!a.trace.empty()) {
    // The first evaluation episode, re-run with the same seeds.
    auto env = env::make_env(policy.config.env);
    std::mt19937_64 env_rng(train::stream_seed(a.seed, train::Stream::Env));
    std::mt19937_64 explore(train::stream_seed(a.seed, train::Stream::Exploration));
    train::EpisodeResult ep =
      train::run_episode(*env, policy.params, policy.model, 0.0, explore, env_rng(), nullptr);
    ep.trace.env = policy.config.env;
    std::ofstream out(a.trace);
    if (!out) {
      throw UsageError("cannot write " + a.trace);
    }
    env::write_trace(out, ep.trace);
  }
  return 0;
}

struct IgmArgs
{
  igm::LabOptions options;
  std::string out = "verify-igm.json";
};

int run_verify_igm(const IgmArgs & a)
{
  const igm::LabReport report = igm::run_lab(a.options);
  std::cout << igm::format_report(report);
  write_json(a.out, igm::to_json(report));
  if (!report.sufficiency_pass()) {
    for (const igm::Witness & w : report.sufficiency_failures) {
      std::cerr << "sufficiency witness: " << igm::to_json(w).dump() << '\n';
    }
    return 5;
  }
  return report.pass() ? 0 : 1;
}

int run_replay(const std::string & path)
{
  std::ifstream in(path);
  if (!in) {
    throw UsageError("cannot open trace " + path);
  }
  const env::Trace trace = env::read_trace(in);
  const std::vector<std::string> frames = env::replay_frames(trace);
  double total = 0.0;
  for (std::size_t k = 0; k < frames.size(); ++k) {
    std::cout << frames[k] << '\n';
    total += trace.lines[k].reward;
  }
  std::cout << frames.size() << " frames, return " << total << '\n';
  return 0;
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Asynchronous multi-agent value factorization with macro-actions"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto * train_cmd = app.add_subcommand("train", "train a policy from a JSON config");
  add_train_options(*train_cmd, train_args);

  TrainArgs ablate_args;
  std::string variant;
  auto * ablate_cmd = app.add_subcommand("ablate", "train with a module replaced or disabled");
  add_train_options(*ablate_cmd, ablate_args);
  ablate_cmd->add_option("--variant", variant, "mac-jert | no-atpg | both")
  ->required()->check(CLI::IsMember({"mac-jert", "no-atpg", "both"}));

  EvalArgs eval_args;
  auto * eval_cmd = app.add_subcommand("eval", "greedy evaluation of a checkpoint");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "checkpoint directory")->required();
  eval_cmd->add_option("--episodes", eval_args.episodes, "evaluation episodes")->capture_default_str();
  eval_cmd->add_option("--seed", eval_args.seed, "evaluation seed")->capture_default_str();
  eval_cmd->add_option("--out", eval_args.out, "JSON statistics file")->capture_default_str();
  eval_cmd->add_option("--trace", eval_args.trace, "also write the first episode as a trace file");

  IgmArgs igm_args;
  auto * igm_cmd = app.add_subcommand("verify-igm", "brute-force consistency checks on tabular instances");
  igm_cmd->add_option("--seed", igm_args.options.seed, "random seed")->capture_default_str();
  igm_cmd->add_option("--max-agents", igm_args.options.max_agents)->capture_default_str();
  igm_cmd->add_option("--max-actions", igm_args.options.max_actions)->capture_default_str();
  igm_cmd->add_option("--max-duration", igm_args.options.max_duration)->capture_default_str();
  igm_cmd->add_option("--histories", igm_args.options.histories)->capture_default_str();
  igm_cmd->add_option("--draws", igm_args.options.draws_per_shape, "mixer draws per shape")->capture_default_str();
  igm_cmd->add_option("--adv-draws", igm_args.options.adv_draws, "offset draws")->capture_default_str();
  igm_cmd->add_option("--out", igm_args.out, "JSON report file")->capture_default_str();

  std::string trace_path;
  auto * replay_cmd = app.add_subcommand("replay", "render a stored rollout trace as ASCII frames");
  replay_cmd->add_option("trace", trace_path, "trace file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp & e) {
    return app.exit(e);
  } catch (const CLI::ParseError & e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*train_cmd) {return run_training(train_args, std::nullopt);}
    if (*ablate_cmd) {return run_training(ablate_args, variant);}
    if (*eval_cmd) {return run_eval(eval_args);}
    if (*igm_cmd) {return run_verify_igm(igm_args);}
    if (*replay_cmd) {return run_replay(trace_path);}
  } catch (const UsageError & e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const train::ConfigError & e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const env::TraceFormatError & e) {
    std::cerr << "malformed trace: " << e.what() << '\n';
    return 2;
  } catch (const train::TrainingAborted & e) {
    std::cerr << "training aborted: " << e.what() << '\n';
    return 3;
  } catch (const numerics::CheckpointError & e) {
    std::cerr << "checkpoint error: " << e.what() << '\n';
    return 4;
  } catch (const numerics::ContractViolation & e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception & e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
