#pragma once

#include "tomac/encoding.hpp"
#include "tomac/numerics/tensor.hpp"

#include <cstdint>
#include <vector>

namespace tomac::replay
{

using numerics::VectorXd;

/// Everything written at one primitive timestep t.
///
/// `hidden` is each agent's recurrent state *before* consuming the step-t token, so a
/// training unroll can restart from any recorded step. `stale_observations` is what a
/// termination-driven buffer would hold: the observation from the agent's latest
/// macro-action selection.
struct StepRecord
{
  int t = 0;
  VectorXd state;
  std::vector<VectorXd> observations;
  std::vector<VectorXd> stale_observations;
  std::vector<VectorXd> hidden;
  std::vector<int> actions;
  std::vector<int> progress;
  std::vector<int> prev_actions;
  std::vector<int> prev_progress;
  double reward = 0.0;
  std::vector<int> terminated;
  bool done = false;
  /// Per-agent bitmask of initiation-legal macro-actions; empty means all legal.
  std::vector<std::uint32_t> available;
};

/// Frame recorded after the last step: the world the final macro-actions terminated in.
struct ClosingFrame
{
  int t = 0;
  VectorXd state;
  std::vector<VectorXd> observations;
  std::vector<VectorXd> stale_observations;
  std::vector<VectorXd> hidden;
  std::vector<std::uint32_t> available;
};

/// Packed storage for one episode: `num_steps()` step frames plus one closing frame.
///
/// Frame indices run 0..num_steps(); step-only fields (actions, reward, flags) exist for
/// frames below num_steps(). Frame k's previous joint macro-action is frame k-1's.
class EpisodeTrace
{
public:
  EpisodeTrace(int num_agents, int state_size, int obs_size, int hidden_size);

  void append(const StepRecord & record);
  void close(const ClosingFrame & frame);

  bool closed() const {return closed_;}
  int num_agents() const {return agents_;}
  int num_steps() const {return static_cast<int>(rewards_.size());}
  int num_frames() const {return num_steps() + (closed_ ? 1 : 0);}
  int state_size() const {return state_size_;}
  int obs_size() const {return obs_size_;}
  int hidden_size() const {return hidden_size_;}

  int time(int frame) const {return times_[static_cast<std::size_t>(frame)];}
  Eigen::Map<const VectorXd> state(int frame) const;
  Eigen::Map<const VectorXd> observation(int frame, int agent) const;
  Eigen::Map<const VectorXd> stale_observation(int frame, int agent) const;
  Eigen::Map<const VectorXd> hidden(int frame, int agent) const;

  int action(int step, int agent) const;
  int progress(int step, int agent) const;
  /// Macro-action executed at frame-1 (-1 at frame 0) and its progress then.
  int prev_action(int frame, int agent) const;
  int prev_progress(int frame, int agent) const;
  double reward(int step) const {return rewards_.at(static_cast<std::size_t>(step));}
  int terminated(int step, int agent) const;
  bool done(int step) const {return done_.at(static_cast<std::size_t>(step)) != 0;}
  std::uint32_t available(int frame, int agent) const;

  /// Materialised copy of step `step`, for audits.
  StepRecord record(int step) const;

private:
  int agents_;
  int state_size_;
  int obs_size_;
  int hidden_size_;
  bool closed_ = false;
  std::vector<int> times_;
  std::vector<double> states_;
  std::vector<double> obs_;
  std::vector<double> stale_;
  std::vector<double> hidden_;
  std::vector<int> actions_;
  std::vector<int> progress_;
  std::vector<double> rewards_;
  std::vector<int> terminated_;
  std::vector<unsigned char> done_;
  std::vector<std::uint32_t> available_;
};

inline constexpr std::uint32_t kAllAvailable = 0xFFFFFFFFu;

/// Encoded macro-observation ô_t = obs ⊕ f_e(t) (or the bare obs when dim = 0).
VectorXd encoded_observation(const EpisodeTrace & ep, int frame, int agent, int dim, bool stale = false);

/// Encoded macro-action m_{k,t} = onehot ⊕ f_e(t) ⊕ f_e(t_m) of the action run at `step`.
VectorXd encoded_action(const EpisodeTrace & ep, int step, int agent, int num_actions, int dim);

}  // namespace tomac::replay
