#pragma once

#include "tomac/model/config.hpp"
#include "tomac/numerics/layers.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace tomac::model
{

using numerics::Matrix;
using numerics::ParamBundle;
using numerics::Tape;
using numerics::Var;
using numerics::VectorXd;
using MatrixXd = Matrix<double>;

/// What an agent knows about the macro-action it ran on the previous step.
struct PrevMacro
{
  int id = -1;
  int time = 0;
  int progress = 0;
  bool terminated = true;
};

/// Input token ô_t ⊕ m_{t-1} for one agent. `obs` is the raw macro-observation.
VectorXd agent_token(
  const ModelConfig & cfg, const VectorXd & obs, int t, const PrevMacro & prev, int agent);

/// Path prefix of agent i's network ("agent" when parameters are shared).
std::string agent_prefix(const ModelConfig & cfg, int agent);

void init_agent_nets(ParamBundle & params, const ModelConfig & cfg, std::mt19937_64 & rng);

struct AgentNetVars
{
  numerics::BasicLinearVars<double> input;
  numerics::BasicGruVars<double> cell;
  numerics::BasicLinearVars<double> head;
};

AgentNetVars bind_agent_net(Tape & tape, const ParamBundle & params, const ModelConfig & cfg, int agent);

struct QOutput
{
  Var q;
  Var hidden;
};

/// One recurrent step for a batch of rows: tokens B x token_size, hidden B x H.
QOutput q_forward(const AgentNetVars & net, const Var & hidden, const Var & tokens);

/// Per-agent execution state.
struct AgentRuntime
{
  VectorXd hidden;
  int current = -1;
  int progress = 0;
  int started_at = 0;
  bool terminated = true;
};

/// Keeps the running macro-action unless terminated; otherwise ε-greedy over `available`
/// with ties to the lowest id. A new selection resets progress to 0.
int select(
  AgentRuntime & runtime, const VectorXd & q, const std::vector<int> & available, double epsilon,
  std::mt19937_64 & rng, int now = 0);

/// Lowest-id argmax of q over the ids set in `mask`.
int masked_argmax(const VectorXd & q, std::uint32_t mask);

struct EpsilonSchedule
{
  double start = 1.0;
  double end = 0.1;
  int decay_episodes = 4000;
};

/// Linear from start to end over decay_episodes, then flat.
double epsilon_at(const EpsilonSchedule & schedule, long episode);

}  // namespace tomac::model
