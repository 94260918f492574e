#pragma once

#include "tomac/env/macro_env.hpp"
#include "tomac/model/agentnet.hpp"
#include "tomac/model/config.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace tomac::train
{

using json = nlohmann::ordered_json;

enum class BufferKind { MacSjert, MacJert };
enum class TargetMode { Hard, Soft };

struct TrainConfig
{
  env::EnvConfig env;
  int episodes = 40000;
  /// Train every `train_freq` episodes.
  int train_freq = 10;
  /// Each training round covers this many episodes' worth of transitions.
  int episodes_per_train = 16;
  int batch_size = 128;
  TargetMode target_mode = TargetMode::Hard;
  /// Hard mode: copy every this many episodes.
  int target_update = 32;
  /// Soft mode: Θ' ← ωΘ' + (1-ω)Θ after every training round.
  double soft_omega = 0.99;
  double learning_rate = 1e-3;
  double gamma = 0.95;
  model::EpsilonSchedule epsilon;
  int n_step = 1;
  std::uint64_t seed = 0;
  BufferKind buffer = BufferKind::MacSjert;
  bool atpg = true;
  std::size_t buffer_capacity = 50000;
  int time_dim = 8;
  int rnn_hidden = 32;
  int attention_dim = 32;
  int mixer_hidden = 32;
  double delta = 0.0;
  bool share_parameters = true;
  /// Frames replayed before each training point to rebuild recurrent and attention state.
  int context = 7;
  double grad_clip = 10.0;
  /// Greedy evaluation every this many episodes (0: only at the end).
  int eval_every = 0;
  int eval_episodes = 10;
  bool record_wall_clock = false;
  std::string variant = "full";
};

/// Thrown for schema violations; `path` names the offending field ("epsilon.start").
class ConfigError : public std::runtime_error
{
public:
  ConfigError(const std::string & path, const std::string & what)
  : std::runtime_error(path.empty() ? what : path + ": " + what), path_(path) {}

  const std::string & path() const {return path_;}

private:
  std::string path_;
};

json to_json(const TrainConfig & config);
/// Missing keys keep their defaults; unknown keys and wrong types are rejected.
TrainConfig config_from_json(const json & j);
void validate(const TrainConfig & config);

std::string to_string(BufferKind kind);
std::string to_string(TargetMode mode);

/// Model shapes implied by a config and its environment.
model::ModelConfig model_config(const TrainConfig & config, const env::MacroEnv & env);

/// Named random sub-streams derived from one seed.
enum class Stream : std::uint64_t { Env = 1, Exploration = 2, Init = 3, Sampling = 4, Evaluation = 5 };
std::uint64_t stream_seed(std::uint64_t seed, Stream stream);

}  // namespace tomac::train
