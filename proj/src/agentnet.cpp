#include "tomac/model/agentnet.hpp"

#include "tomac/encoding.hpp"

#include <algorithm>
#include <stdexcept>

namespace tomac::model
{

namespace
{

// Tokens are rebuilt for every replayed frame; the sinusoids only depend on (t, dim).
const VectorXd & time_code(int t, int dim)
{
  thread_local std::vector<std::vector<VectorXd>> cache;
  if (static_cast<int>(cache.size()) <= dim) {
    cache.resize(static_cast<std::size_t>(dim) + 1);
  }
  auto & row = cache[static_cast<std::size_t>(dim)];
  while (static_cast<int>(row.size()) <= t) {
    row.push_back(encoding::encode_time(static_cast<long>(row.size()), dim));
  }
  return row[static_cast<std::size_t>(t)];
}

}  // namespace

VectorXd agent_token(
  const ModelConfig & cfg, const VectorXd & obs, int t, const PrevMacro & prev, int agent)
{
  if (obs.size() != cfg.obs_size) {
    throw numerics::DimensionError(
            "observation of size " + std::to_string(obs.size()) + ", expected " +
            std::to_string(cfg.obs_size));
  }
  const int d = cfg.time_dim;
  if (t < 0 || prev.progress < 0 || prev.progress > prev.time || (prev.id >= cfg.num_actions)) {
    throw std::invalid_argument("agent_token: inconsistent times or macro-action id");
  }
  VectorXd token = VectorXd::Zero(cfg.token_size());
  int at = 0;
  token.segment(at, cfg.obs_size) = obs;
  at += cfg.obs_size;
  token.segment(at, d) = time_code(t, d);
  at += d;
  // Before t = 0 nothing ran: empty one-hot with zero-time codes.
  if (prev.id >= 0) {
    token(at + prev.id) = 1.0;
  }
  at += cfg.num_actions;
  token.segment(at, d) = time_code(prev.id >= 0 ? prev.time : 0, d);
  at += d;
  token.segment(at, d) = time_code(prev.id >= 0 ? prev.progress : 0, d);
  at += d;
  token(at++) = prev.terminated ? 1.0 : 0.0;
  if (cfg.share_parameters) {
    token(at + agent) = 1.0;
  }
  return token;
}

std::string agent_prefix(const ModelConfig & cfg, int agent)
{
  return cfg.share_parameters ? std::string("agent") : "agent" + std::to_string(agent);
}

void init_agent_nets(ParamBundle & params, const ModelConfig & cfg, std::mt19937_64 & rng)
{
  const int copies = cfg.share_parameters ? 1 : cfg.num_agents;
  for (int i = 0; i < copies; ++i) {
    const std::string p = agent_prefix(cfg, i);
    numerics::init_linear(params, p + ".input", cfg.token_size(), cfg.hidden, rng);
    numerics::init_gru(params, p + ".gru", cfg.hidden, cfg.hidden, rng);
    numerics::init_linear(params, p + ".head", cfg.hidden, cfg.num_actions, rng);
  }
}

AgentNetVars bind_agent_net(Tape & tape, const ParamBundle & params, const ModelConfig & cfg, int agent)
{
  const std::string p = agent_prefix(cfg, agent);
  return {numerics::bind_linear(tape, params, p + ".input"), numerics::bind_gru(tape, params, p + ".gru"),
    numerics::bind_linear(tape, params, p + ".head")};
}

QOutput q_forward(const AgentNetVars & net, const Var & hidden, const Var & tokens)
{
  if (tokens.cols() != net.input.weight.rows()) {
    throw numerics::DimensionError(
            "token width " + std::to_string(tokens.cols()) + ", network expects " +
            std::to_string(net.input.weight.rows()));
  }
  Var x = numerics::relu(numerics::linear(net.input, tokens));
  Var h = numerics::gru_step(net.cell, hidden, x);
  return {numerics::linear(net.head, h), h};
}

int masked_argmax(const VectorXd & q, std::uint32_t mask)
{
  int best = -1;
  for (int a = 0; a < q.size(); ++a) {
    if (((mask >> a) & 1u) && (best < 0 || q(a) > q(best))) {
      best = a;
    }
  }
  if (best < 0) {
    throw std::invalid_argument("no available macro-action");
  }
  return best;
}

int select(
  AgentRuntime & runtime, const VectorXd & q, const std::vector<int> & available, double epsilon,
  std::mt19937_64 & rng, int now)
{
  if (!runtime.terminated) {
    return runtime.current;
  }
  if (available.empty()) {
    throw std::invalid_argument("no available macro-action");
  }
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  int choice = -1;
  if (coin(rng) < epsilon) {
    std::uniform_int_distribution<std::size_t> pick(0, available.size() - 1);
    choice = available[pick(rng)];
  } else {
    for (int a : available) {
      if (a < 0 || a >= q.size()) {
        throw std::out_of_range("available id " + std::to_string(a) + " outside the q vector");
      }
      if (choice < 0 || q(a) > q(choice) || (q(a) == q(choice) && a < choice)) {
        choice = a;
      }
    }
  }
  runtime.current = choice;
  runtime.progress = 0;
  runtime.started_at = now;
  runtime.terminated = false;
  return choice;
}

double epsilon_at(const EpsilonSchedule & s, long episode)
{
  if (s.decay_episodes <= 0 || episode >= s.decay_episodes) {
    return s.end;
  }
  const double frac = static_cast<double>(std::max(0L, episode)) / s.decay_episodes;
  return s.start + (s.end - s.start) * frac;
}

}  // namespace tomac::model
