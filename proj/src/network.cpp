#include "tomac/model/network.hpp"

#include <algorithm>
#include <numeric>

namespace tomac::model
{

using namespace tomac::numerics;

ParamBundle init_model(const ModelConfig & cfg, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  ParamBundle params;
  init_agent_nets(params, cfg, rng);
  init_atpg(params, cfg, rng);
  return params;
}

VectorXd frame_token(const ModelConfig & cfg, const replay::EpisodeTrace & ep, int frame, int agent)
{
  PrevMacro prev;
  if (frame > 0) {
    prev.id = ep.prev_action(frame, agent);
    prev.time = ep.time(frame - 1);
    prev.progress = ep.prev_progress(frame, agent);
    prev.terminated = ep.terminated(frame - 1, agent) != 0;
  }
  const VectorXd obs = cfg.stale_obs ? VectorXd(ep.stale_observation(frame, agent)) :
    VectorXd(ep.observation(frame, agent));
  return agent_token(cfg, obs, ep.time(frame), prev, agent);
}

namespace
{

struct Sequence
{
  const replay::EpisodeTrace * episode;
  int agent;
  int begin;
  int length;
};

// Runs one network over sequences sorted by descending length, so the rows still active
// at every step form a prefix. Returns final hidden states in sorted order.
Var unroll(
  Tape & tape, const AgentNetVars & net, const ModelConfig & cfg,
  const std::vector<Sequence> & seqs, const std::vector<std::size_t> & order,
  const ForwardOptions & options, Var * q_out)
{
  const auto rows = static_cast<Eigen::Index>(order.size());
  const int max_len = rows == 0 ? 0 : seqs[order[0]].length;
  MatrixXd h0(rows, cfg.hidden);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Sequence & s = seqs[order[static_cast<std::size_t>(r)]];
    h0.row(r) = s.episode->hidden(s.begin, s.agent).transpose();
  }
  Var h = tape.constant(std::move(h0));
  std::vector<Var> finished;
  for (int k = 0; k < max_len; ++k) {
    Eigen::Index active = 0;
    while (active < rows && seqs[order[static_cast<std::size_t>(active)]].length > k) {
      ++active;
    }
    MatrixXd x(active, cfg.token_size());
    for (Eigen::Index r = 0; r < active; ++r) {
      const Sequence & s = seqs[order[static_cast<std::size_t>(r)]];
      x.row(r) = frame_token(cfg, *s.episode, s.begin + k, s.agent).transpose();
    }
    if (active < h.rows()) {
      h = slice_rows(h, 0, active);
    }
    h = q_forward(net, h, tape.constant(std::move(x))).hidden;
    Eigen::Index still = 0;
    while (still < active && seqs[order[static_cast<std::size_t>(still)]].length > k + 1) {
      ++still;
    }
    if (still < active) {
      finished.push_back(slice_rows(h, still, active - still));
    }
  }
  // Blocks were emitted shortest-last-first; longest sequences sit at the top.
  std::reverse(finished.begin(), finished.end());
  Var final_h = concat_rows(finished);
  *q_out = linear(net.head, final_h);
  return final_h;
}

}  // namespace

PointOutputs evaluate_points(
  Tape & tape, const ParamBundle & params, const ModelConfig & cfg,
  const std::vector<EvalPoint> & points, const ForwardOptions & options)
{
  const int n = cfg.num_agents;
  const auto batch = static_cast<Eigen::Index>(points.size());
  if (batch == 0) {
    throw ContractViolation("evaluate_points needs at least one point");
  }

  // Sequence index = b * n + i.
  std::vector<Sequence> seqs;
  seqs.reserve(static_cast<std::size_t>(batch * n));
  for (const EvalPoint & p : points) {
    const int begin = std::max(0, p.frame - options.context);
    for (int i = 0; i < n; ++i) {
      seqs.push_back({p.episode, i, begin, p.frame - begin + 1});
    }
  }

  PointOutputs out;
  const int groups = cfg.share_parameters ? 1 : n;
  std::vector<Var> group_q(static_cast<std::size_t>(groups));
  std::vector<std::vector<std::size_t>> group_order(static_cast<std::size_t>(groups));
  for (std::size_t s = 0; s < seqs.size(); ++s) {
    group_order[cfg.share_parameters ? 0 : static_cast<std::size_t>(seqs[s].agent)].push_back(s);
  }
  for (int g = 0; g < groups; ++g) {
    auto & order = group_order[static_cast<std::size_t>(g)];
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return seqs[a].length > seqs[b].length;
      });
    AgentNetVars net = bind_agent_net(tape, params, cfg, g);
    unroll(tape, net, cfg, seqs, order, options, &group_q[static_cast<std::size_t>(g)]);
  }
  // Undo the sort: agent i's rows in point order.
  for (int i = 0; i < n; ++i) {
    const int g = cfg.share_parameters ? 0 : i;
    const auto & order = group_order[static_cast<std::size_t>(g)];
    std::vector<Eigen::Index> position(seqs.size(), -1);
    for (std::size_t r = 0; r < order.size(); ++r) {
      position[order[r]] = static_cast<Eigen::Index>(r);
    }
    std::vector<Eigen::Index> rows;
    for (Eigen::Index b = 0; b < batch; ++b) {
      rows.push_back(position[static_cast<std::size_t>(b * n + i)]);
    }
    out.q.push_back(gather_rows(group_q[static_cast<std::size_t>(g)], rows));
  }

  MatrixXd state(batch, cfg.state_size);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const EvalPoint & p = points[static_cast<std::size_t>(b)];
    state.row(b) = p.episode->state(p.frame).transpose();
  }
  Var s = tape.constant(std::move(state));

  AtpgVars atpg = bind_atpg(tape, params, cfg);
  if (!cfg.atpg) {
    out.mixer = generate_state_mixer_params(atpg, s);
    return out;
  }

  // Temporal attention over each sequence's window; keep the row at the point itself.
  Eigen::Index total_rows = 0;
  for (const Sequence & sq : seqs) {
    total_rows += sq.length;
  }
  MatrixXd tokens(total_rows, cfg.token_size());
  std::vector<Eigen::Index> lengths;
  std::vector<Eigen::Index> last_row(seqs.size());
  Eigen::Index at = 0;
  for (std::size_t k = 0; k < seqs.size(); ++k) {
    const Sequence & sq = seqs[k];
    for (int f = 0; f < sq.length; ++f) {
      tokens.row(at++) = frame_token(cfg, *sq.episode, sq.begin + f, sq.agent).transpose();
    }
    lengths.push_back(sq.length);
    last_row[k] = at - 1;
  }
  Var encoded = temporal_encode(atpg, tape.constant(std::move(tokens)), lengths);
  std::vector<Var> e;
  for (int i = 0; i < n; ++i) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index b = 0; b < batch; ++b) {
      rows.push_back(last_row[static_cast<std::size_t>(b * n + i)]);
    }
    e.push_back(gather_rows(encoded, rows));
  }
  AgentEncoding enc = agent_encode(atpg, e, cfg.delta);
  out.mixer = generate_mixer_params(atpg, enc.e_hat, s);
  return out;
}

Var joint_q(const PointOutputs & out, const std::vector<std::vector<int>> & actions)
{
  const std::size_t n = out.q.size();
  std::vector<Var> chosen;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Eigen::Index> cols;
    cols.reserve(actions.size());
    for (const auto & joint : actions) {
      cols.push_back(joint.at(i));
    }
    chosen.push_back(pick(out.q[i], cols));
  }
  return mix(concat_cols(chosen), out.mixer);
}

}  // namespace tomac::model
