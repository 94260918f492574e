#pragma once

#include "tomac/replay/episode.hpp"

#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <vector>

namespace tomac::replay
{

using EpisodePtr = std::shared_ptr<const EpisodeTrace>;

/// One agent's completed macro-action: steps start..end of `episode`.
struct MacroSegment
{
  int owner = 0;
  int macro_action = 0;
  int start = 0;
  int end = 0;
  /// Σ γ^τ r_{start+τ} over the segment, fixed when the segment closes.
  double reward = 0.0;
  /// Global termination counter; defines the per-agent order ≺.
  std::uint64_t order = 0;
  EpisodePtr episode;

  int duration() const {return end - start + 1;}
};

/// D^i_j ≺ D^i_k: j terminated before k.
inline bool precedes(const MacroSegment & a, const MacroSegment & b) {return a.order < b.order;}

/// Steps t and t+1 of an episode; t+1 may be the closing frame.
struct MicroTransition
{
  EpisodePtr episode;
  int step = 0;
};

struct MacroTransition
{
  MacroSegment segment;
  /// Frame holding s': the one right after the last executed step.
  int next_frame() const {return segment.end + 1;}
};

struct BufferConfig
{
  int num_agents = 2;
  double gamma = 0.95;
  std::size_t capacity = 50000;
};

/// Σ γ^τ r over steps start..end of an episode.
double discounted_return(const EpisodeTrace & ep, int start, int end, double gamma);

class AgentBuffer
{
public:
  AgentBuffer(int agent, std::size_t capacity)
  : agent_(agent), capacity_(capacity) {}

  int agent() const {return agent_;}
  std::size_t capacity() const {return capacity_;}
  const std::deque<MacroSegment> & segments() const {return segments_;}
  std::size_t size() const {return segments_.size();}
  /// Number of (t, t+1) pairs across closed segments.
  std::size_t step_pairs() const {return pairs_;}

  void push(MacroSegment segment);

private:
  int agent_;
  std::size_t capacity_;
  std::deque<MacroSegment> segments_;
  std::size_t pairs_ = 0;
};

/// Mac-SJERT: per-agent segmented replay with decentralised cumulative rewards.
///
/// Usage per episode: start_episode, record_step for every primitive step, end_episode.
/// Segments close when their flag is set but are only published to samplers at
/// end_episode, once every frame they reference exists.
class MacSjertBuffer
{
public:
  MacSjertBuffer(BufferConfig config, int state_size, int obs_size, int hidden_size);

  const BufferConfig & config() const {return config_;}
  int state_size() const {return state_size_;}
  int obs_size() const {return obs_size_;}
  int hidden_size() const {return hidden_size_;}
  const AgentBuffer & agent(int i) const {return agents_.at(static_cast<std::size_t>(i));}
  bool episode_open() const {return current_ != nullptr;}

  void start_episode();
  void record_step(const StepRecord & record);
  /// Closes the trace, publishes its segments and returns the finished episode.
  EpisodePtr end_episode(const ClosingFrame & closing);

  /// Uniform over all step pairs of all closed segments; nullopt when there are none.
  std::optional<std::vector<MicroTransition>> sample_micro(std::size_t batch, std::mt19937_64 & rng) const;
  /// Uniform over agent i's closed segments; nullopt when there are none.
  std::optional<std::vector<MacroTransition>> sample_macro(
    int agent, std::size_t batch, std::mt19937_64 & rng) const;

  /// Publishes a segment directly (used when loading a saved buffer).
  void restore_segment(MacroSegment segment);

private:
  void rebuild_index() const;

  BufferConfig config_;
  int state_size_;
  int obs_size_;
  int hidden_size_;
  std::vector<AgentBuffer> agents_;
  std::shared_ptr<EpisodeTrace> current_;
  struct Open
  {
    bool active = false;
    int start = 0;
    int macro_action = 0;
  };
  std::vector<Open> open_;
  std::vector<MacroSegment> pending_;
  std::uint64_t next_order_ = 0;

  mutable bool index_dirty_ = true;
  mutable std::vector<const MacroSegment *> index_segments_;
  mutable std::vector<std::size_t> index_prefix_;
};

void save_buffer(const MacSjertBuffer & buffer, const std::filesystem::path & dir);
/// Throws CheckpointError-style runtime errors on version or γ mismatch.
MacSjertBuffer load_buffer(const std::filesystem::path & dir, double expected_gamma);

inline constexpr int kBufferFormatVersion = 1;

// ----------------------------------------------------------------------------
// Mac-JERT baseline: joint transitions between consecutive decision points.

struct JertTransition
{
  EpisodePtr episode;
  int start = 0;
  int end = 0;
  /// Reward accumulated since the last termination of ANY agent.
  double reward = 0.0;

  int duration() const {return end - start + 1;}
};

class MacJertBuffer
{
public:
  MacJertBuffer(double gamma, std::size_t capacity)
  : gamma_(gamma), capacity_(capacity) {}

  double gamma() const {return gamma_;}
  void add_episode(const EpisodePtr & episode);
  const std::deque<JertTransition> & transitions() const {return transitions_;}
  std::optional<std::vector<JertTransition>> sample(std::size_t batch, std::mt19937_64 & rng) const;

  /// Reward a termination-driven buffer credits to `agent`'s macro-action ending at
  /// step `end`: only what accrued after the latest termination of any agent.
  static double credited_reward(const EpisodeTrace & ep, int agent_end, double gamma);

private:
  double gamma_;
  std::size_t capacity_;
  std::deque<JertTransition> transitions_;
};

/// Builds the baseline view of complete episodes.
MacJertBuffer as_macjert(const std::vector<EpisodePtr> & episodes, double gamma, std::size_t capacity);

/// Decision points of an episode: step 0 and every step following any termination.
std::vector<int> decision_points(const EpisodeTrace & ep);

}  // namespace tomac::replay
