#include "tomac/train/config.hpp"

#include <random>
#include <set>

namespace tomac::train
{

std::string to_string(BufferKind kind)
{
  return kind == BufferKind::MacSjert ? "mac-sjert" : "mac-jert";
}

std::string to_string(TargetMode mode)
{
  return mode == TargetMode::Hard ? "hard" : "soft";
}

json to_json(const TrainConfig & c)
{
  json j;
  j["env"] = {{"name", c.env.name}, {"grid_size", c.env.grid_size}, {"horizon", c.env.horizon}};
  j["episodes"] = c.episodes;
  j["train_freq"] = c.train_freq;
  j["episodes_per_train"] = c.episodes_per_train;
  j["batch_size"] = c.batch_size;
  j["target_mode"] = to_string(c.target_mode);
  j["target_update"] = c.target_update;
  j["soft_omega"] = c.soft_omega;
  j["learning_rate"] = c.learning_rate;
  j["gamma"] = c.gamma;
  j["epsilon"] = {
    {"start", c.epsilon.start}, {"end", c.epsilon.end}, {"decay_episodes", c.epsilon.decay_episodes}};
  j["n_step"] = c.n_step;
  j["seed"] = c.seed;
  j["buffer"] = to_string(c.buffer);
  j["atpg"] = c.atpg;
  j["buffer_capacity"] = c.buffer_capacity;
  j["model"] = {
    {"time_dim", c.time_dim}, {"rnn_hidden", c.rnn_hidden}, {"attention_dim", c.attention_dim},
    {"mixer_hidden", c.mixer_hidden}, {"delta", c.delta}, {"share_parameters", c.share_parameters}};
  j["context"] = c.context;
  j["grad_clip"] = c.grad_clip;
  j["eval_every"] = c.eval_every;
  j["eval_episodes"] = c.eval_episodes;
  j["record_wall_clock"] = c.record_wall_clock;
  j["variant"] = c.variant;
  return j;
}

namespace
{

class Reader
{
public:
  Reader(const json & j, std::string prefix)
  : j_(j), prefix_(std::move(prefix))
  {
    if (!j_.is_object()) {
      throw ConfigError(prefix_, "expected an object");
    }
  }

  std::string path(const std::string & key) const {return prefix_.empty() ? key : prefix_ + "." + key;}

  template<typename T>
  void get(const std::string & key, T & out)
  {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) {
      return;
    }
    const json & v = *it;
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) {throw ConfigError(path(key), "expected a boolean");}
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) {throw ConfigError(path(key), "expected an integer");}
      if constexpr (std::is_unsigned_v<T>) {
        if (v.get<long long>() < 0) {throw ConfigError(path(key), "expected a nonnegative integer");}
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) {throw ConfigError(path(key), "expected a number");}
    } else {
      if (!v.is_string()) {throw ConfigError(path(key), "expected a string");}
    }
    out = v.get<T>();
  }

  Reader child(const std::string & key)
  {
    seen_.insert(key);
    auto it = j_.find(key);
    static const json empty = json::object();
    return Reader(it == j_.end() ? empty : *it, path(key));
  }

  void finish() const
  {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) {
        throw ConfigError(path(it.key()), "unknown key");
      }
    }
  }

private:
  const json & j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

}  // namespace

TrainConfig config_from_json(const json & j)
{
  TrainConfig c;
  Reader r(j, "");
  {
    Reader e = r.child("env");
    e.get("name", c.env.name);
    e.get("grid_size", c.env.grid_size);
    e.get("horizon", c.env.horizon);
    e.finish();
  }
  r.get("episodes", c.episodes);
  r.get("train_freq", c.train_freq);
  r.get("episodes_per_train", c.episodes_per_train);
  r.get("batch_size", c.batch_size);
  std::string target_mode = to_string(c.target_mode);
  r.get("target_mode", target_mode);
  if (target_mode == "hard") {
    c.target_mode = TargetMode::Hard;
  } else if (target_mode == "soft") {
    c.target_mode = TargetMode::Soft;
  } else {
    throw ConfigError("target_mode", "expected \"hard\" or \"soft\"");
  }
  r.get("target_update", c.target_update);
  r.get("soft_omega", c.soft_omega);
  r.get("learning_rate", c.learning_rate);
  r.get("gamma", c.gamma);
  {
    Reader e = r.child("epsilon");
    e.get("start", c.epsilon.start);
    e.get("end", c.epsilon.end);
    e.get("decay_episodes", c.epsilon.decay_episodes);
    e.finish();
  }
  r.get("n_step", c.n_step);
  r.get("seed", c.seed);
  std::string buffer = to_string(c.buffer);
  r.get("buffer", buffer);
  if (buffer == "mac-sjert") {
    c.buffer = BufferKind::MacSjert;
  } else if (buffer == "mac-jert") {
    c.buffer = BufferKind::MacJert;
  } else {
    throw ConfigError("buffer", "expected \"mac-sjert\" or \"mac-jert\"");
  }
  r.get("atpg", c.atpg);
  r.get("buffer_capacity", c.buffer_capacity);
  {
    Reader m = r.child("model");
    m.get("time_dim", c.time_dim);
    m.get("rnn_hidden", c.rnn_hidden);
    m.get("attention_dim", c.attention_dim);
    m.get("mixer_hidden", c.mixer_hidden);
    m.get("delta", c.delta);
    m.get("share_parameters", c.share_parameters);
    m.finish();
  }
  r.get("context", c.context);
  r.get("grad_clip", c.grad_clip);
  r.get("eval_every", c.eval_every);
  r.get("eval_episodes", c.eval_episodes);
  r.get("record_wall_clock", c.record_wall_clock);
  r.get("variant", c.variant);
  r.finish();
  validate(c);
  return c;
}

void validate(const TrainConfig & c)
{
  auto positive = [](const char * path, double v) {
      if (!(v > 0)) {
        throw ConfigError(path, "must be positive");
      }
    };
  positive("episodes", c.episodes);
  positive("train_freq", c.train_freq);
  positive("episodes_per_train", c.episodes_per_train);
  positive("batch_size", c.batch_size);
  positive("target_update", c.target_update);
  positive("n_step", c.n_step);
  positive("buffer_capacity", static_cast<double>(c.buffer_capacity));
  positive("model.rnn_hidden", c.rnn_hidden);
  positive("model.attention_dim", c.attention_dim);
  positive("model.mixer_hidden", c.mixer_hidden);
  positive("env.horizon", c.env.horizon);
  positive("eval_episodes", c.eval_episodes);
  if (c.learning_rate < 0) {throw ConfigError("learning_rate", "must be nonnegative");}
  if (!(c.gamma > 0 && c.gamma <= 1)) {throw ConfigError("gamma", "must lie in (0, 1]");}
  if (c.soft_omega < 0 || c.soft_omega > 1) {throw ConfigError("soft_omega", "must lie in [0, 1]");}
  if (c.epsilon.start < 0 || c.epsilon.start > 1) {throw ConfigError("epsilon.start", "must lie in [0, 1]");}
  if (c.epsilon.end < 0 || c.epsilon.end > c.epsilon.start) {
    throw ConfigError("epsilon.end", "must lie in [0, epsilon.start]");
  }
  if (c.epsilon.decay_episodes < 0) {throw ConfigError("epsilon.decay_episodes", "must be nonnegative");}
  if (c.time_dim < 0 || c.time_dim % 2 != 0) {throw ConfigError("model.time_dim", "must be even and nonnegative");}
  if (c.delta < 0 || c.delta > 1) {throw ConfigError("model.delta", "must lie in [0, 1]");}
  if (c.context < 0) {throw ConfigError("context", "must be nonnegative");}
  if (c.grad_clip <= 0) {throw ConfigError("grad_clip", "must be positive");}
  if (c.eval_every < 0) {throw ConfigError("eval_every", "must be nonnegative");}
}

model::ModelConfig model_config(const TrainConfig & c, const env::MacroEnv & env)
{
  model::ModelConfig m;
  m.num_agents = env.num_agents();
  m.num_actions = env.num_macro_actions();
  m.obs_size = env.observation_size();
  m.state_size = env.state_size();
  // The termination-driven baseline carries no temporal codes.
  m.time_dim = c.buffer == BufferKind::MacJert ? 0 : c.time_dim;
  m.stale_obs = c.buffer == BufferKind::MacJert;
  m.hidden = c.rnn_hidden;
  m.attention_dim = c.attention_dim;
  m.mixer_hidden = c.mixer_hidden;
  m.delta = c.delta;
  m.share_parameters = c.share_parameters;
  m.atpg = c.atpg;
  return m;
}

std::uint64_t stream_seed(std::uint64_t seed, Stream stream)
{
  std::seed_seq seq{
    static_cast<std::uint32_t>(seed & 0xFFFFFFFFu), static_cast<std::uint32_t>(seed >> 32),
    static_cast<std::uint32_t>(stream)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

}  // namespace tomac::train
