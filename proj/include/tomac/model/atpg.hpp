#pragma once

#include "tomac/model/agentnet.hpp"

#include <optional>
#include <vector>

namespace tomac::model
{

/// Generated mixer parameters for a batch of B rows. w1[i] is agent i's B x h row block.
struct MixerParams
{
  std::vector<Var> w1;
  Var b1;
  Var w2;
  Var b2;
};

/// Attention matrices plus mixer generators. With cfg.atpg off only the state
/// hypernetworks exist and the attention members are unbound.
struct AtpgVars
{
  bool atpg = true;
  int num_agents = 0;
  double scale = 1.0;
  numerics::BasicLinearVars<double> token;
  Var tem_q;
  Var tem_k;
  Var tem_v;
  Var agent_q;
  Var agent_k;
  Var agent_v;
  numerics::BasicLinearVars<double> gen_w1;
  numerics::BasicLinearVars<double> gen_b1;
  numerics::BasicLinearVars<double> gen_w2;
  numerics::BasicLinearVars<double> gen_b2_hidden;
  numerics::BasicLinearVars<double> gen_b2_out;
};

void init_atpg(ParamBundle & params, const ModelConfig & cfg, std::mt19937_64 & rng);
AtpgVars bind_atpg(Tape & tape, const ParamBundle & params, const ModelConfig & cfg);

/// Causal temporal self-attention over stacked per-sequence token rows. Returns one
/// d-wide row per input row; row t of a block depends only on rows 0..t of that block.
Var temporal_encode(const AtpgVars & vars, const Var & tokens, const std::vector<Eigen::Index> & lengths);

struct AgentEncoding
{
  std::vector<Var> e_hat;
  /// alpha[b] is the n x n attention matrix of batch row b after masking.
  std::vector<MatrixXd> alpha;
};

/// Agent-oriented attention: softmax over j != i, entries not above δ dropped, survivors
/// renormalised, then ê_i = e_i + Σ_j α_ij v_j.
AgentEncoding agent_encode(const AtpgVars & vars, const std::vector<Var> & e, double delta);

/// Rows of `alpha` with entries <= δ zeroed and the rest rescaled to sum to 1; a row
/// with no survivor becomes zero.
Var threshold_renormalize(const Var & alpha, double delta);

/// |f_w1(ê_i ⊕ s)|, |f_b1(ê_1..ê_n ⊕ s)|, |f_w2(s)| and an unconstrained two-layer b2(s).
MixerParams generate_mixer_params(const AtpgVars & vars, const std::vector<Var> & e_hat, const Var & state);

/// QMIX hypernetworks from the state alone (the no-ATPG ablation).
MixerParams generate_state_mixer_params(const AtpgVars & vars, const Var & state);

}  // namespace tomac::model
