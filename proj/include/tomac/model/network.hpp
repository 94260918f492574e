#pragma once

#include "tomac/model/mixer.hpp"
#include "tomac/replay/episode.hpp"

#include <cstdint>
#include <vector>

namespace tomac::model
{

/// Fresh parameters for agent nets, ATPG and the mixer generators.
ParamBundle init_model(const ModelConfig & cfg, std::uint64_t seed);

/// Token of agent i at a recorded frame, built from the trace alone.
VectorXd frame_token(const ModelConfig & cfg, const replay::EpisodeTrace & ep, int frame, int agent);

/// A recorded frame whose utilities and mixer parameters are wanted.
struct EvalPoint
{
  const replay::EpisodeTrace * episode = nullptr;
  int frame = 0;
};

struct PointOutputs
{
  /// q[i] is B x |M|: agent i's utilities at each point.
  std::vector<Var> q;
  MixerParams mixer;
};

struct ForwardOptions
{
  /// Frames replayed before each point, starting from the hidden state stored there.
  int context = 7;
};

/// Rebuilds each agent's recurrent state over [frame - context, frame] from the stored
/// hidden state, runs temporal attention over the same window, agent attention, and
/// generates mixer parameters from the point's global state.
PointOutputs evaluate_points(
  Tape & tape, const ParamBundle & params, const ModelConfig & cfg,
  const std::vector<EvalPoint> & points, const ForwardOptions & options);

/// Q_total at each point for the given joint macro-actions (B rows of n ids).
Var joint_q(const PointOutputs & out, const std::vector<std::vector<int>> & actions);

}  // namespace tomac::model
