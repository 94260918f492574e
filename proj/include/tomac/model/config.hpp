#pragma once

namespace tomac::model
{

/// Shapes and switches shared by the agent networks, ATPG and the mixer.
struct ModelConfig
{
  int num_agents = 2;
  int num_actions = 8;
  int obs_size = 5;
  int state_size = 19;
  /// Sinusoidal code width; 0 drops every time code (the Mac-JERT ablation).
  int time_dim = 8;
  int hidden = 32;
  int attention_dim = 32;
  int mixer_hidden = 32;
  /// Agent-attention weights below this are zeroed before renormalisation.
  double delta = 0.0;
  bool share_parameters = true;
  /// Off: state-only hypernetworks generate the mixer weights (plain QMIX).
  bool atpg = true;
  /// Feed the observation from each agent's latest selection instead of the fresh one.
  bool stale_obs = false;

  /// [obs | f(t) | prev onehot | f(t-1) | f(t_m) | prev terminated | agent id]
  int token_size() const
  {
    return obs_size + 3 * time_dim + num_actions + 1 + (share_parameters ? num_agents : 0);
  }
};

}  // namespace tomac::model
