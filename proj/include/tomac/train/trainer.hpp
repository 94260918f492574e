#pragma once

#include "tomac/env/trace.hpp"
#include "tomac/model/network.hpp"
#include "tomac/numerics/adam.hpp"
#include "tomac/numerics/checkpoint.hpp"
#include "tomac/replay/buffer.hpp"
#include "tomac/train/config.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <vector>

namespace tomac::train
{

using model::ModelConfig;
using numerics::ParamBundle;
using numerics::Tape;
using numerics::Var;

// ----------------------------------------------------------------------------
// Rollouts

struct EpisodeResult
{
  double total_reward = 0.0;
  int steps = 0;
  env::Trace trace;
  replay::EpisodePtr episode;
};

/// Plays one episode with asynchronous ε-greedy selection. Records into `buffer` when
/// given; otherwise builds a standalone trace when `keep_episode` is set.
EpisodeResult run_episode(
  env::MacroEnv & env, const ParamBundle & params, const ModelConfig & cfg, double epsilon,
  std::mt19937_64 & explore, std::uint64_t env_seed, replay::MacSjertBuffer * buffer,
  bool keep_episode = false);

// ----------------------------------------------------------------------------
// TD losses

/// One regression target: Q_total at `online` for the recorded joint macro-action,
/// against reward + discount * max Q̄_total at `next` (when bootstrapping).
struct TdItem
{
  model::EvalPoint online;
  std::vector<int> actions;
  double reward = 0.0;
  double discount = 1.0;
  bool bootstrap = false;
  model::EvalPoint next;
  /// Macro-actions still running at `next` and which agents may re-select there.
  std::vector<int> pinned;
  std::vector<int> terminated;
  std::vector<std::uint32_t> available;
};

/// Target frame `next` for a window whose last executed step is `last_step`.
TdItem make_item(
  const replay::EpisodeTrace & ep, int online_frame, int last_step, double reward, double discount);

std::vector<TdItem> micro_items(
  const std::vector<replay::MicroTransition> & batch, double gamma, int n_step);
std::vector<TdItem> macro_items(const std::vector<replay::MacroTransition> & batch, double gamma);
std::vector<TdItem> jert_items(const std::vector<replay::JertTransition> & batch, double gamma);

/// reward + discount * Q̄_total(next, conditional max) using target parameters only.
std::vector<double> td_targets(
  const ParamBundle & target, const ModelConfig & cfg, const std::vector<TdItem> & items,
  const model::ForwardOptions & options);

/// mean((Q_total(online) - y)^2) recorded on `tape`.
Var td_loss(
  Tape & tape, const ParamBundle & params, const ModelConfig & cfg, const std::vector<TdItem> & items,
  const std::vector<double> & targets, const model::ForwardOptions & options);

/// mean((q - y)^2) for a column of Q_total values.
Var squared_td(const Var & q_total, const std::vector<double> & targets);

/// Θ' ← ωΘ' + (1-ω)Θ.
void update_target(const ParamBundle & online, ParamBundle & target, double omega);

// ----------------------------------------------------------------------------
// Training

class TrainingAborted : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

struct MetricsRow
{
  long episode = 0;
  double train_return = 0.0;
  int steps = 0;
  double epsilon = 0.0;
  std::optional<double> micro_loss;
  std::optional<double> macro_loss;
  std::optional<double> eval_mean;
  std::optional<double> eval_std;
  std::optional<double> wall_clock;
};

json metrics_json(const MetricsRow & row);
std::string metrics_csv_header();
std::string metrics_csv_line(const MetricsRow & row);

struct EvalStats
{
  int episodes = 0;
  double mean = 0.0;
  double std = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::vector<double> returns;
};

json eval_json(const EvalStats & stats);

struct TrainOutputs
{
  /// Empty paths skip the corresponding file.
  std::filesystem::path metrics_jsonl;
  std::filesystem::path metrics_csv;
  std::filesystem::path checkpoint_dir;
};

struct TrainResult
{
  ParamBundle params;
  ParamBundle target;
  ModelConfig model;
  std::vector<MetricsRow> metrics;
};

using ProgressFn = std::function<void (const MetricsRow &)>;

TrainResult train(const TrainConfig & config, const TrainOutputs & outputs = {}, const ProgressFn & progress = {});

/// Greedy (ε = 0) rollouts; `epsilon` 1 gives the uniform random-macro baseline.
EvalStats evaluate(
  const ParamBundle & params, const ModelConfig & cfg, const env::EnvConfig & env_config,
  int episodes, std::uint64_t seed, double epsilon = 0.0);

numerics::Checkpoint make_checkpoint(const TrainConfig & config, const TrainResult & result);

struct LoadedPolicy
{
  TrainConfig config;
  ModelConfig model;
  ParamBundle params;
};

/// Throws numerics::CheckpointVersionError on format mismatch.
LoadedPolicy load_policy(const std::filesystem::path & checkpoint_dir);

}  // namespace tomac::train
