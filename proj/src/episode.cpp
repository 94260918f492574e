#include "tomac/replay/episode.hpp"

#include <stdexcept>
#include <string>

namespace tomac::replay
{

namespace
{

void append_vector(std::vector<double> & dst, const VectorXd & v, int expected, const char * what)
{
  if (v.size() != expected) {
    throw numerics::DimensionError(
            std::string(what) + " of size " + std::to_string(v.size()) + ", expected " +
            std::to_string(expected));
  }
  dst.insert(dst.end(), v.data(), v.data() + v.size());
}

void append_available(std::vector<std::uint32_t> & dst, const std::vector<std::uint32_t> & masks, int agents)
{
  if (masks.empty()) {
    dst.insert(dst.end(), static_cast<std::size_t>(agents), kAllAvailable);
    return;
  }
  if (static_cast<int>(masks.size()) != agents) {
    throw numerics::DimensionError("availability masks: wrong agent count");
  }
  dst.insert(dst.end(), masks.begin(), masks.end());
}

void append_agents(
  std::vector<double> & dst, const std::vector<VectorXd> & vs, int agents, int size, const char * what)
{
  if (static_cast<int>(vs.size()) != agents) {
    throw numerics::DimensionError(std::string(what) + ": wrong agent count");
  }
  for (const auto & v : vs) {
    append_vector(dst, v, size, what);
  }
}

}  // namespace

EpisodeTrace::EpisodeTrace(int num_agents, int state_size, int obs_size, int hidden_size)
: agents_(num_agents), state_size_(state_size), obs_size_(obs_size), hidden_size_(hidden_size)
{}

void EpisodeTrace::append(const StepRecord & r)
{
  if (closed_) {
    throw numerics::ContractViolation("append to a closed episode");
  }
  if (!done_.empty() && done_.back()) {
    throw numerics::ContractViolation("record after the episode finished");
  }
  const auto n = static_cast<std::size_t>(agents_);
  if (r.actions.size() != n || r.progress.size() != n || r.terminated.size() != n) {
    throw numerics::DimensionError("step record has the wrong agent count");
  }
  const int frame = num_steps();
  for (std::size_t i = 0; i < n; ++i) {
    const int prev = frame == 0 ? -1 : actions_[(frame - 1) * n + i];
    const int given = r.prev_actions.empty() ? prev : r.prev_actions[i];
    if (given != prev) {
      throw numerics::ContractViolation("previous macro-action disagrees with the recorded step");
    }
  }
  times_.push_back(r.t);
  append_vector(states_, r.state, state_size_, "state");
  append_agents(obs_, r.observations, agents_, obs_size_, "observation");
  append_agents(stale_, r.stale_observations, agents_, obs_size_, "stale observation");
  append_agents(hidden_, r.hidden, agents_, hidden_size_, "hidden state");
  append_available(available_, r.available, agents_);
  actions_.insert(actions_.end(), r.actions.begin(), r.actions.end());
  progress_.insert(progress_.end(), r.progress.begin(), r.progress.end());
  terminated_.insert(terminated_.end(), r.terminated.begin(), r.terminated.end());
  rewards_.push_back(r.reward);
  done_.push_back(r.done ? 1 : 0);
}

void EpisodeTrace::close(const ClosingFrame & f)
{
  if (closed_) {
    throw numerics::ContractViolation("episode closed twice");
  }
  times_.push_back(f.t);
  append_vector(states_, f.state, state_size_, "state");
  append_agents(obs_, f.observations, agents_, obs_size_, "observation");
  append_agents(stale_, f.stale_observations, agents_, obs_size_, "stale observation");
  append_agents(hidden_, f.hidden, agents_, hidden_size_, "hidden state");
  append_available(available_, f.available, agents_);
  closed_ = true;
}

Eigen::Map<const VectorXd> EpisodeTrace::state(int frame) const
{
  return {states_.data() + static_cast<std::size_t>(frame) * state_size_, state_size_};
}

Eigen::Map<const VectorXd> EpisodeTrace::observation(int frame, int agent) const
{
  return {obs_.data() + (static_cast<std::size_t>(frame) * agents_ + agent) * obs_size_, obs_size_};
}

Eigen::Map<const VectorXd> EpisodeTrace::stale_observation(int frame, int agent) const
{
  return {stale_.data() + (static_cast<std::size_t>(frame) * agents_ + agent) * obs_size_, obs_size_};
}

Eigen::Map<const VectorXd> EpisodeTrace::hidden(int frame, int agent) const
{
  return {hidden_.data() + (static_cast<std::size_t>(frame) * agents_ + agent) * hidden_size_,
    hidden_size_};
}

int EpisodeTrace::action(int step, int agent) const
{
  return actions_.at(static_cast<std::size_t>(step) * agents_ + agent);
}

int EpisodeTrace::progress(int step, int agent) const
{
  return progress_.at(static_cast<std::size_t>(step) * agents_ + agent);
}

int EpisodeTrace::prev_action(int frame, int agent) const
{
  return frame == 0 ? -1 : action(frame - 1, agent);
}

int EpisodeTrace::prev_progress(int frame, int agent) const
{
  return frame == 0 ? 0 : progress(frame - 1, agent);
}

int EpisodeTrace::terminated(int step, int agent) const
{
  return terminated_.at(static_cast<std::size_t>(step) * agents_ + agent);
}

std::uint32_t EpisodeTrace::available(int frame, int agent) const
{
  return available_.at(static_cast<std::size_t>(frame) * agents_ + agent);
}

StepRecord EpisodeTrace::record(int step) const
{
  if (step < 0 || step >= num_steps()) {
    throw std::out_of_range("step " + std::to_string(step) + " outside episode");
  }
  StepRecord r;
  r.t = time(step);
  r.state = state(step);
  for (int i = 0; i < agents_; ++i) {
    r.observations.emplace_back(observation(step, i));
    r.stale_observations.emplace_back(stale_observation(step, i));
    r.hidden.emplace_back(hidden(step, i));
    r.actions.push_back(action(step, i));
    r.progress.push_back(progress(step, i));
    r.prev_actions.push_back(prev_action(step, i));
    r.prev_progress.push_back(prev_progress(step, i));
    r.terminated.push_back(terminated(step, i));
    r.available.push_back(available(step, i));
  }
  r.reward = reward(step);
  r.done = done(step);
  return r;
}

VectorXd encoded_observation(const EpisodeTrace & ep, int frame, int agent, int dim, bool stale)
{
  const VectorXd obs = stale ? VectorXd(ep.stale_observation(frame, agent)) :
    VectorXd(ep.observation(frame, agent));
  return encoding::encode_macro_observation(obs, ep.time(frame), dim).flatten();
}

VectorXd encoded_action(const EpisodeTrace & ep, int step, int agent, int num_actions, int dim)
{
  return encoding::encode_macro_action(
    ep.action(step, agent), num_actions, ep.time(step), ep.progress(step, agent), dim).flatten();
}

}  // namespace tomac::replay
