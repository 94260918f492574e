#include "tomac/train/trainer.hpp"

namespace tomac::train
{

using numerics::VectorXd;
using MatrixXd = numerics::Matrix<double>;

namespace
{

std::uint32_t mask_of(const std::vector<int> & ids)
{
  std::uint32_t mask = 0;
  for (int a : ids) {
    mask |= 1u << a;
  }
  return mask;
}

}  // namespace

EpisodeResult run_episode(
  env::MacroEnv & env, const ParamBundle & params, const ModelConfig & cfg, double epsilon,
  std::mt19937_64 & explore, std::uint64_t env_seed, replay::MacSjertBuffer * buffer,
  bool keep_episode)
{
  const int n = env.num_agents();
  env.reset(env_seed);

  EpisodeResult result;
  result.trace.seed = env_seed;
  std::shared_ptr<replay::EpisodeTrace> local;
  if (buffer != nullptr) {
    buffer->start_episode();
  } else if (keep_episode) {
    local = std::make_shared<replay::EpisodeTrace>(n, cfg.state_size, cfg.obs_size, cfg.hidden);
  }

  // One non-recording tape per episode; parameters are bound once.
  Tape tape(false);
  std::vector<model::AgentNetVars> nets;
  for (int g = 0; g < (cfg.share_parameters ? 1 : n); ++g) {
    nets.push_back(model::bind_agent_net(tape, params, cfg, g));
  }

  std::vector<model::AgentRuntime> runtime(static_cast<std::size_t>(n));
  std::vector<model::PrevMacro> prev(static_cast<std::size_t>(n));
  std::vector<VectorXd> stale(static_cast<std::size_t>(n));
  for (auto & r : runtime) {
    r.hidden = VectorXd::Zero(cfg.hidden);
  }

  auto observe = [&](std::vector<VectorXd> & obs, std::vector<std::uint32_t> & available) {
      obs.clear();
      available.clear();
      for (int i = 0; i < n; ++i) {
        obs.push_back(env.macro_observation(i));
        available.push_back(mask_of(env.available_macro_actions(i)));
        if (runtime[static_cast<std::size_t>(i)].terminated) {
          stale[static_cast<std::size_t>(i)] = obs.back();
        }
      }
    };

  std::vector<VectorXd> obs;
  std::vector<std::uint32_t> available;
  while (!env.done()) {
    const int t = env.time();
    replay::StepRecord rec;
    rec.t = t;
    rec.state = env.state_features();
    observe(obs, available);
    rec.observations = obs;
    rec.stale_observations = stale;
    rec.available = available;

    // Every agent consumes its token each step; only terminated ones choose.
    MatrixXd tokens(n, cfg.token_size());
    MatrixXd hidden(n, cfg.hidden);
    for (int i = 0; i < n; ++i) {
      const auto & r = runtime[static_cast<std::size_t>(i)];
      rec.hidden.push_back(r.hidden);
      const VectorXd & input = cfg.stale_obs ? stale[static_cast<std::size_t>(i)] : obs[static_cast<std::size_t>(i)];
      tokens.row(i) = model::agent_token(cfg, input, t, prev[static_cast<std::size_t>(i)], i).transpose();
      hidden.row(i) = r.hidden.transpose();
    }
    MatrixXd q(n, cfg.num_actions);
    MatrixXd next_hidden(n, cfg.hidden);
    if (cfg.share_parameters) {
      auto out = model::q_forward(nets[0], tape.constant(hidden), tape.constant(tokens));
      q = out.q.value();
      next_hidden = out.hidden.value();
    } else {
      for (int i = 0; i < n; ++i) {
        auto out = model::q_forward(
          nets[static_cast<std::size_t>(i)], tape.constant(MatrixXd(hidden.row(i))),
          tape.constant(MatrixXd(tokens.row(i))));
        q.row(i) = out.q.value().row(0);
        next_hidden.row(i) = out.hidden.value().row(0);
      }
    }

    std::vector<env::ActiveMacro> active;
    for (int i = 0; i < n; ++i) {
      auto & r = runtime[static_cast<std::size_t>(i)];
      r.hidden = next_hidden.row(i).transpose();
      model::select(r, q.row(i).transpose(), env.available_macro_actions(i), epsilon, explore, t);
      active.push_back({r.current, r.progress});
      rec.actions.push_back(r.current);
      rec.progress.push_back(r.progress);
    }

    const env::StepOutcome out = env.advance(active);
    rec.reward = out.reward;
    rec.terminated = out.terminated;
    rec.done = out.done;
    result.total_reward += out.reward;
    result.steps += 1;
    result.trace.lines.push_back({t, rec.actions, rec.progress, out.reward, out.terminated});

    if (buffer != nullptr) {
      buffer->record_step(rec);
    } else if (local) {
      local->append(rec);
    }

    for (int i = 0; i < n; ++i) {
      auto & r = runtime[static_cast<std::size_t>(i)];
      prev[static_cast<std::size_t>(i)] = {r.current, t, r.progress, out.terminated[static_cast<std::size_t>(i)] != 0};
      r.progress += 1;
      r.terminated = out.terminated[static_cast<std::size_t>(i)] != 0;
    }
  }

  if (buffer != nullptr || local) {
    replay::ClosingFrame closing;
    closing.t = env.time();
    closing.state = env.state_features();
    observe(obs, available);
    closing.observations = obs;
    closing.stale_observations = stale;
    closing.available = available;
    for (const auto & r : runtime) {
      closing.hidden.push_back(r.hidden);
    }
    if (buffer != nullptr) {
      result.episode = buffer->end_episode(closing);
    } else {
      local->close(closing);
      result.episode = local;
    }
  }
  return result;
}

}  // namespace tomac::train
