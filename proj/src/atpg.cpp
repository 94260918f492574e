#include "tomac/model/atpg.hpp"

#include <cmath>

namespace tomac::model
{

using namespace tomac::numerics;

namespace
{

void init_square(ParamBundle & params, const std::string & path, int d, std::mt19937_64 & rng)
{
  MatrixXd w(d, d);
  init_uniform_fan_in(w, d, rng);
  params.tensors[path] = std::move(w);
}

}  // namespace

void init_atpg(ParamBundle & params, const ModelConfig & cfg, std::mt19937_64 & rng)
{
  const int d = cfg.attention_dim;
  const int h = cfg.mixer_hidden;
  const int s = cfg.state_size;
  if (cfg.atpg) {
    init_linear(params, "atpg.token", cfg.token_size(), d, rng);
    init_square(params, "atpg.tem_q", d, rng);
    init_square(params, "atpg.tem_k", d, rng);
    init_square(params, "atpg.tem_v", d, rng);
    init_square(params, "atpg.agent_q", d, rng);
    init_square(params, "atpg.agent_k", d, rng);
    init_square(params, "atpg.agent_v", d, rng);
    init_linear(params, "atpg.w1", d + s, h, rng);
    init_linear(params, "atpg.b1", cfg.num_agents * d + s, h, rng);
  } else {
    init_linear(params, "hyper.w1", s, cfg.num_agents * h, rng);
    init_linear(params, "hyper.b1", s, h, rng);
  }
  init_linear(params, "hyper.w2", s, h, rng);
  init_linear(params, "hyper.b2_hidden", s, h, rng);
  init_linear(params, "hyper.b2_out", h, 1, rng);
}

AtpgVars bind_atpg(Tape & tape, const ParamBundle & params, const ModelConfig & cfg)
{
  AtpgVars v;
  v.atpg = cfg.atpg;
  v.num_agents = cfg.num_agents;
  v.scale = 1.0 / std::sqrt(static_cast<double>(cfg.attention_dim));
  if (cfg.atpg) {
    v.token = bind_linear(tape, params, "atpg.token");
    v.tem_q = tape.param(params, "atpg.tem_q");
    v.tem_k = tape.param(params, "atpg.tem_k");
    v.tem_v = tape.param(params, "atpg.tem_v");
    v.agent_q = tape.param(params, "atpg.agent_q");
    v.agent_k = tape.param(params, "atpg.agent_k");
    v.agent_v = tape.param(params, "atpg.agent_v");
    v.gen_w1 = bind_linear(tape, params, "atpg.w1");
    v.gen_b1 = bind_linear(tape, params, "atpg.b1");
  } else {
    v.gen_w1 = bind_linear(tape, params, "hyper.w1");
    v.gen_b1 = bind_linear(tape, params, "hyper.b1");
  }
  v.gen_w2 = bind_linear(tape, params, "hyper.w2");
  v.gen_b2_hidden = bind_linear(tape, params, "hyper.b2_hidden");
  v.gen_b2_out = bind_linear(tape, params, "hyper.b2_out");
  return v;
}

Var temporal_encode(const AtpgVars & vars, const Var & tokens, const std::vector<Eigen::Index> & lengths)
{
  Var z = relu(linear(vars.token, tokens));
  return causal_attention(matmul(z, vars.tem_q), matmul(z, vars.tem_k), matmul(z, vars.tem_v), lengths, vars.scale);
}

Var threshold_renormalize(const Var & alpha, double delta)
{
  Tape & tape = *alpha.tape();
  const MatrixXd & a = alpha.value();
  MatrixXd keep = (a.array() > delta).cast<double>().matrix();
  if (tape.recording()) {
    for (Eigen::Index i = 0; i < keep.size(); ++i) {
      tape.note_kink_flag(keep.data()[i] != 0.0);
    }
  }
  MatrixXd kept = a.cwiseProduct(keep);
  Eigen::VectorXd sums = kept.rowwise().sum();
  MatrixXd out = MatrixXd::Zero(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    if (sums(r) > 0.0) {
      out.row(r) = kept.row(r) / sums(r);
    }
  }
  MatrixXd y = out;
  return tape.record(
    std::move(out), {alpha},
    [alpha, keep = std::move(keep), y = std::move(y), sums = std::move(sums)](Tape & t, const MatrixXd & g) {
      MatrixXd d = MatrixXd::Zero(g.rows(), g.cols());
      for (Eigen::Index r = 0; r < g.rows(); ++r) {
        if (sums(r) <= 0.0) {
          continue;
        }
        const double inner = g.row(r).dot(y.row(r));
        d.row(r) = ((g.row(r).array() - inner) / sums(r)).matrix().cwiseProduct(keep.row(r));
      }
      t.accumulate(alpha, d);
    });
}

AgentEncoding agent_encode(const AtpgVars & vars, const std::vector<Var> & e, double delta)
{
  const int n = static_cast<int>(e.size());
  AgentEncoding out;
  if (n == 0) {
    return out;
  }
  const Eigen::Index batch = e[0].rows();
  out.alpha.assign(static_cast<std::size_t>(batch), MatrixXd::Zero(n, n));
  if (n == 1) {
    out.e_hat = e;
    return out;
  }
  std::vector<Var> q;
  std::vector<Var> k;
  std::vector<Var> v;
  for (const Var & ei : e) {
    q.push_back(matmul(ei, vars.agent_q));
    k.push_back(matmul(ei, vars.agent_k));
    v.push_back(matmul(ei, vars.agent_v));
  }
  for (int i = 0; i < n; ++i) {
    std::vector<Var> scores;
    std::vector<int> others;
    for (int j = 0; j < n; ++j) {
      if (j != i) {
        scores.push_back(scale(row_sum(cwise_product(q[i], k[j])), vars.scale));
        others.push_back(j);
      }
    }
    Var alpha = threshold_renormalize(softmax_rows(concat_cols(scores)), delta);
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (std::size_t c = 0; c < others.size(); ++c) {
        out.alpha[static_cast<std::size_t>(b)](i, others[c]) = alpha.value()(b, static_cast<Eigen::Index>(c));
      }
    }
    Var mixed = e[static_cast<std::size_t>(i)];
    for (std::size_t c = 0; c < others.size(); ++c) {
      mixed = mixed + scale_rows(v[static_cast<std::size_t>(others[c])], slice_cols(alpha, static_cast<Eigen::Index>(c), 1));
    }
    out.e_hat.push_back(mixed);
  }
  return out;
}

namespace
{

Var state_bias(const AtpgVars & vars, const Var & state)
{
  return linear(vars.gen_b2_out, relu(linear(vars.gen_b2_hidden, state)));
}

}  // namespace

MixerParams generate_mixer_params(const AtpgVars & vars, const std::vector<Var> & e_hat, const Var & state)
{
  if (!vars.atpg) {
    return generate_state_mixer_params(vars, state);
  }
  MixerParams p;
  std::vector<Var> all;
  for (const Var & ei : e_hat) {
    p.w1.push_back(abs(linear(vars.gen_w1, concat_cols(std::vector<Var>{ei, state}))));
    all.push_back(ei);
  }
  all.push_back(state);
  p.b1 = abs(linear(vars.gen_b1, concat_cols(all)));
  p.w2 = abs(linear(vars.gen_w2, state));
  p.b2 = state_bias(vars, state);
  return p;
}

MixerParams generate_state_mixer_params(const AtpgVars & vars, const Var & state)
{
  MixerParams p;
  Var w1 = abs(linear(vars.gen_w1, state));
  const Eigen::Index h = w1.cols() / vars.num_agents;
  for (int i = 0; i < vars.num_agents; ++i) {
    p.w1.push_back(slice_cols(w1, i * h, h));
  }
  p.b1 = linear(vars.gen_b1, state);
  p.w2 = abs(linear(vars.gen_w2, state));
  p.b2 = state_bias(vars, state);
  return p;
}

}  // namespace tomac::model
