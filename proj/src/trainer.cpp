#include "tomac/train/trainer.hpp"

#include "tomac/numerics/layers.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace tomac::train
{

using numerics::VectorXd;
using MatrixXd = numerics::Matrix<double>;

// ----------------------------------------------------------------------------
// TD items

TdItem make_item(
  const replay::EpisodeTrace & ep, int online_frame, int last_step, double reward, double discount)
{
  TdItem item;
  item.online = {&ep, online_frame};
  for (int i = 0; i < ep.num_agents(); ++i) {
    item.actions.push_back(ep.action(online_frame, i));
  }
  item.reward = reward;
  item.discount = discount;
  // Episodes end only on their final step; that frame has nothing to bootstrap from.
  item.bootstrap = !ep.done(last_step);
  item.next = {&ep, last_step + 1};
  if (item.bootstrap) {
    for (int i = 0; i < ep.num_agents(); ++i) {
      item.pinned.push_back(ep.action(last_step, i));
      item.terminated.push_back(ep.terminated(last_step, i));
      item.available.push_back(ep.available(last_step + 1, i));
    }
  }
  return item;
}

std::vector<TdItem> micro_items(
  const std::vector<replay::MicroTransition> & batch, double gamma, int n_step)
{
  std::vector<TdItem> items;
  items.reserve(batch.size());
  for (const auto & tr : batch) {
    const replay::EpisodeTrace & ep = *tr.episode;
    const int last = std::min(tr.step + n_step - 1, ep.num_steps() - 1);
    const double reward = replay::discounted_return(ep, tr.step, last, gamma);
    items.push_back(make_item(ep, tr.step, last, reward, std::pow(gamma, last - tr.step + 1)));
  }
  return items;
}

std::vector<TdItem> macro_items(const std::vector<replay::MacroTransition> & batch, double gamma)
{
  std::vector<TdItem> items;
  items.reserve(batch.size());
  for (const auto & tr : batch) {
    const auto & s = tr.segment;
    items.push_back(make_item(*s.episode, s.start, s.end, s.reward, std::pow(gamma, s.duration())));
  }
  return items;
}

std::vector<TdItem> jert_items(const std::vector<replay::JertTransition> & batch, double gamma)
{
  std::vector<TdItem> items;
  items.reserve(batch.size());
  for (const auto & tr : batch) {
    items.push_back(make_item(*tr.episode, tr.start, tr.end, tr.reward, std::pow(gamma, tr.duration())));
  }
  return items;
}

std::vector<double> td_targets(
  const ParamBundle & target, const ModelConfig & cfg, const std::vector<TdItem> & items,
  const model::ForwardOptions & options)
{
  std::vector<double> y(items.size());
  std::vector<model::EvalPoint> points;
  std::vector<std::size_t> which;
  for (std::size_t k = 0; k < items.size(); ++k) {
    y[k] = items[k].reward;
    if (items[k].bootstrap) {
      points.push_back(items[k].next);
      which.push_back(k);
    }
  }
  if (points.empty()) {
    return y;
  }
  Tape tape(false);
  model::PointOutputs out = model::evaluate_points(tape, target, cfg, points, options);
  std::vector<MatrixXd> q;
  for (const Var & v : out.q) {
    q.push_back(v.value());
  }
  std::vector<std::vector<int>> terminated;
  std::vector<std::vector<int>> pinned;
  std::vector<std::vector<std::uint32_t>> available;
  for (std::size_t k : which) {
    terminated.push_back(items[k].terminated);
    pinned.push_back(items[k].pinned);
    available.push_back(items[k].available);
  }
  const auto choice = model::conditional_choice(q, terminated, pinned, available);
  const MatrixXd best = model::joint_q(out, choice).value();
  for (std::size_t r = 0; r < which.size(); ++r) {
    const std::size_t k = which[r];
    y[k] += items[k].discount * best(static_cast<Eigen::Index>(r), 0);
  }
  return y;
}

Var squared_td(const Var & q_total, const std::vector<double> & targets)
{
  if (q_total.rows() != static_cast<Eigen::Index>(targets.size()) || q_total.cols() != 1) {
    throw numerics::DimensionError("squared_td: Q column does not match targets");
  }
  MatrixXd y(q_total.rows(), 1);
  for (std::size_t k = 0; k < targets.size(); ++k) {
    y(static_cast<Eigen::Index>(k), 0) = targets[k];
  }
  Var delta = q_total - q_total.tape()->constant(std::move(y));
  return numerics::mean(numerics::cwise_product(delta, delta));
}

Var td_loss(
  Tape & tape, const ParamBundle & params, const ModelConfig & cfg, const std::vector<TdItem> & items,
  const std::vector<double> & targets, const model::ForwardOptions & options)
{
  std::vector<model::EvalPoint> points;
  std::vector<std::vector<int>> actions;
  for (const TdItem & item : items) {
    points.push_back(item.online);
    actions.push_back(item.actions);
  }
  model::PointOutputs out = model::evaluate_points(tape, params, cfg, points, options);
  return squared_td(model::joint_q(out, actions), targets);
}

void update_target(const ParamBundle & online, ParamBundle & target, double omega)
{
  if (!online.same_layout(target)) {
    throw numerics::DimensionError("target parameters do not match the online layout");
  }
  for (auto & [path, value] : target.tensors) {
    const MatrixXd & src = online.at(path);
    if (omega == 0.0) {
      value = src;
    } else if (omega != 1.0) {
      value = omega * value + (1.0 - omega) * src;
    }
  }
  target.version = online.version;
}

// ----------------------------------------------------------------------------
// Metrics

json metrics_json(const MetricsRow & row)
{
  auto opt = [](const std::optional<double> & v) {return v ? json(*v) : json(nullptr);};
  json j;
  j["episode"] = row.episode;
  j["return"] = row.train_return;
  j["steps"] = row.steps;
  j["epsilon"] = row.epsilon;
  j["micro_loss"] = opt(row.micro_loss);
  j["macro_loss"] = opt(row.macro_loss);
  j["eval_mean"] = opt(row.eval_mean);
  j["eval_std"] = opt(row.eval_std);
  if (row.wall_clock) {
    j["wall_clock"] = *row.wall_clock;
  }
  return j;
}

std::string metrics_csv_header()
{
  return "episode,return,steps,epsilon,micro_loss,macro_loss,eval_mean,eval_std,wall_clock";
}

std::string metrics_csv_line(const MetricsRow & row)
{
  std::ostringstream out;
  out << std::setprecision(17);
  auto opt = [&](const std::optional<double> & v) {
      out << ',';
      if (v) {out << *v;}
    };
  out << row.episode << ',' << row.train_return << ',' << row.steps << ',' << row.epsilon;
  opt(row.micro_loss);
  opt(row.macro_loss);
  opt(row.eval_mean);
  opt(row.eval_std);
  opt(row.wall_clock);
  return out.str();
}

json eval_json(const EvalStats & s)
{
  return {{"episodes", s.episodes}, {"mean", s.mean}, {"std", s.std}, {"min", s.min}, {"max", s.max},
    {"returns", s.returns}};
}

// ----------------------------------------------------------------------------
// Training loop

namespace
{

double mean_of(const std::vector<double> & v)
{
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::string parameter_norms(const ParamBundle & params)
{
  std::ostringstream out;
  out << std::setprecision(6);
  for (const auto & [path, value] : params.tensors) {
    out << ' ' << path << '=' << value.norm();
  }
  return out.str();
}

class Learner
{
public:
  Learner(const TrainConfig & config, ModelConfig model)
  : config_(config), model_(std::move(model)),
    params_(model::init_model(model_, stream_seed(config.seed, Stream::Init))),
    target_(params_),
    adam_(numerics::make_adam_state(params_, numerics::AdamOptions{config.learning_rate, 0.9, 0.999, 1e-8}))
  {
    options_.context = config.context;
  }

  // One gradient step on a batch; returns the loss before the step.
  double step(const std::vector<TdItem> & items, const char * loss_name, long episode)
  {
    const std::vector<double> y = td_targets(target_, model_, items, options_);
    Tape tape;
    Var loss = td_loss(tape, params_, model_, items, y, options_);
    const double value = loss.scalar();
    if (!std::isfinite(value)) {
      throw TrainingAborted(
              "non-finite " + std::string(loss_name) + " loss at episode " + std::to_string(episode) +
              "; parameter norms:" + parameter_norms(params_));
    }
    numerics::GradMap grads = tape.backward(loss, params_);
    numerics::clip_global_norm(grads, config_.grad_clip);
    try {
      numerics::adam_step(params_, grads, adam_);
    } catch (const numerics::NonFiniteGradient & e) {
      throw TrainingAborted(
              std::string(e.what()) + " in " + loss_name + " loss at episode " + std::to_string(episode) +
              "; parameter norms:" + parameter_norms(params_));
    }
    params_.version += 1;
    return value;
  }

  ParamBundle & params() {return params_;}
  ParamBundle & target() {return target_;}
  const ModelConfig & model() const {return model_;}

private:
  const TrainConfig & config_;
  ModelConfig model_;
  ParamBundle params_;
  ParamBundle target_;
  numerics::AdamState adam_;
  model::ForwardOptions options_;
};

}  // namespace

TrainResult train(const TrainConfig & config, const TrainOutputs & outputs, const ProgressFn & progress)
{
  validate(config);
  auto env = env::make_env(config.env);
  Learner learner(config, model_config(config, *env));
  const ModelConfig & cfg = learner.model();

  std::mt19937_64 env_rng(stream_seed(config.seed, Stream::Env));
  std::mt19937_64 explore(stream_seed(config.seed, Stream::Exploration));
  std::mt19937_64 sampling(stream_seed(config.seed, Stream::Sampling));
  std::mt19937_64 eval_rng(stream_seed(config.seed, Stream::Evaluation));

  const bool jert = config.buffer == BufferKind::MacJert;
  replay::MacSjertBuffer sjert(
    {cfg.num_agents, config.gamma, config.buffer_capacity}, cfg.state_size, cfg.obs_size, cfg.hidden);
  replay::MacJertBuffer jert_buffer(config.gamma, config.buffer_capacity);

  std::ofstream jsonl;
  std::ofstream csv;
  if (!outputs.metrics_jsonl.empty()) {
    jsonl.open(outputs.metrics_jsonl);
  }
  if (!outputs.metrics_csv.empty()) {
    csv.open(outputs.metrics_csv);
    csv << metrics_csv_header() << '\n';
  }

  const auto started = std::chrono::steady_clock::now();
  TrainResult result;
  std::vector<int> recent_lengths;
  for (long episode = 0; episode < config.episodes; ++episode) {
    MetricsRow row;
    row.episode = episode;
    row.epsilon = model::epsilon_at(config.epsilon, episode);
    const std::uint64_t env_seed = env_rng();
    EpisodeResult ep = run_episode(
      *env, learner.params(), cfg, row.epsilon, explore, env_seed, jert ? nullptr : &sjert, jert);
    if (jert) {
      jert_buffer.add_episode(ep.episode);
    }
    row.train_return = ep.total_reward;
    row.steps = ep.steps;
    recent_lengths.push_back(ep.steps);

    if ((episode + 1) % config.train_freq == 0) {
      const double mean_len = mean_of(std::vector<double>(recent_lengths.begin(), recent_lengths.end()));
      recent_lengths.clear();
      const int iterations = static_cast<int>(
        std::ceil(config.episodes_per_train * mean_len / config.batch_size));
      std::vector<double> micro_losses;
      std::vector<double> macro_losses;
      const auto batch = static_cast<std::size_t>(config.batch_size);
      for (int it = 0; it < iterations; ++it) {
        if (jert) {
          if (auto b = jert_buffer.sample(batch, sampling)) {
            macro_losses.push_back(learner.step(jert_items(*b, config.gamma), "macro", episode));
          }
          continue;
        }
        if (auto b = sjert.sample_micro(batch, sampling)) {
          micro_losses.push_back(learner.step(micro_items(*b, config.gamma, config.n_step), "micro", episode));
        }
        for (int i = 0; i < cfg.num_agents; ++i) {
          if (auto b = sjert.sample_macro(i, batch, sampling)) {
            macro_losses.push_back(learner.step(macro_items(*b, config.gamma), "macro", episode));
          }
        }
      }
      if (!micro_losses.empty()) {row.micro_loss = mean_of(micro_losses);}
      if (!macro_losses.empty()) {row.macro_loss = mean_of(macro_losses);}
      if (config.target_mode == TargetMode::Soft) {
        update_target(learner.params(), learner.target(), config.soft_omega);
      }
    }
    if (config.target_mode == TargetMode::Hard && (episode + 1) % config.target_update == 0) {
      update_target(learner.params(), learner.target(), 0.0);
    }

    const bool last = episode + 1 == config.episodes;
    if ((config.eval_every > 0 && (episode + 1) % config.eval_every == 0) || last) {
      const EvalStats stats = evaluate(
        learner.params(), cfg, config.env, config.eval_episodes, eval_rng(), 0.0);
      row.eval_mean = stats.mean;
      row.eval_std = stats.std;
    }
    if (config.record_wall_clock) {
      row.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    }
    if (jsonl.is_open()) {
      jsonl << metrics_json(row).dump() << '\n';
    }
    if (csv.is_open()) {
      csv << metrics_csv_line(row) << '\n';
    }
    if (progress) {
      progress(row);
    }
    result.metrics.push_back(row);
  }

  result.params = learner.params();
  result.target = learner.target();
  result.model = cfg;
  if (!outputs.checkpoint_dir.empty()) {
    numerics::write_checkpoint(outputs.checkpoint_dir, make_checkpoint(config, result));
  }
  return result;
}

EvalStats evaluate(
  const ParamBundle & params, const ModelConfig & cfg, const env::EnvConfig & env_config,
  int episodes, std::uint64_t seed, double epsilon)
{
  auto env = env::make_env(env_config);
  std::mt19937_64 env_rng(stream_seed(seed, Stream::Env));
  std::mt19937_64 explore(stream_seed(seed, Stream::Exploration));
  EvalStats stats;
  stats.episodes = episodes;
  for (int e = 0; e < episodes; ++e) {
    stats.returns.push_back(
      run_episode(*env, params, cfg, epsilon, explore, env_rng(), nullptr).total_reward);
  }
  if (episodes > 0) {
    stats.mean = mean_of(stats.returns);
    double var = 0.0;
    for (double r : stats.returns) {
      var += (r - stats.mean) * (r - stats.mean);
    }
    stats.std = std::sqrt(var / episodes);
    stats.min = *std::min_element(stats.returns.begin(), stats.returns.end());
    stats.max = *std::max_element(stats.returns.begin(), stats.returns.end());
  }
  return stats;
}

numerics::Checkpoint make_checkpoint(const TrainConfig & config, const TrainResult & result)
{
  numerics::Checkpoint ckpt;
  ckpt.metadata["config"] = to_json(config).dump();
  ckpt.metadata["init_scheme"] = numerics::kInitScheme;
  ckpt.metadata["seed"] = std::to_string(config.seed);
  ckpt.metadata["variant"] = config.variant;
  ckpt.groups["online"] = result.params;
  ckpt.groups["target"] = result.target;
  return ckpt;
}

LoadedPolicy load_policy(const std::filesystem::path & dir)
{
  numerics::Checkpoint ckpt = numerics::read_checkpoint(dir);
  auto it = ckpt.metadata.find("config");
  if (it == ckpt.metadata.end()) {
    throw numerics::CheckpointError("checkpoint has no training configuration");
  }
  LoadedPolicy policy;
  policy.config = config_from_json(json::parse(it->second));
  auto env = env::make_env(policy.config.env);
  policy.model = model_config(policy.config, *env);
  auto group = ckpt.groups.find("online");
  if (group == ckpt.groups.end()) {
    throw numerics::CheckpointError("checkpoint has no online parameters");
  }
  policy.params = std::move(group->second);
  const ParamBundle fresh = model::init_model(policy.model, 0);
  if (!fresh.same_layout(policy.params)) {
    throw numerics::CheckpointError("checkpoint parameters do not match the configured model");
  }
  return policy;
}

}  // namespace tomac::train
