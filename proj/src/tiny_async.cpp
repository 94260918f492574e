#include "tomac/env/tiny_async.hpp"

#include "tomac/env/boxpushing.hpp"

#include <algorithm>
#include <functional>
#include <stdexcept>

namespace tomac::env
{

TinyAsync::TinyAsync(int horizon, Payoff payoff)
: horizon_(horizon), payoff_(payoff)
{
  if (horizon <= 0) {
    throw std::invalid_argument("horizon must be positive");
  }
}

void TinyAsync::reset(std::uint64_t /*seed*/)
{
  t_ = 0;
  done_ = false;
  last_completed_ = {-1, -1};
  running_ = {};
}

std::vector<int> TinyAsync::available_macro_actions(int /*agent*/) const
{
  return {0, 1, 2};
}

std::string TinyAsync::macro_action_name(int id) const
{
  if (id < 0 || id >= kActions) {
    throw std::out_of_range("unknown macro-action id " + std::to_string(id));
  }
  return "Work(" + std::to_string(kDurations[static_cast<std::size_t>(id)]) + ")";
}

StepOutcome TinyAsync::advance(const std::vector<ActiveMacro> & active)
{
  if (done_) {
    throw std::logic_error("advance on a finished tiny-async episode");
  }
  if (active.size() != 2) {
    throw std::invalid_argument("tiny-async needs exactly two active macro-actions");
  }
  StepOutcome out;
  out.terminated.assign(2, 0);
  for (std::size_t i = 0; i < 2; ++i) {
    if (active[i].id < 0 || active[i].id >= kActions) {
      throw std::out_of_range("unknown macro-action id " + std::to_string(active[i].id));
    }
    running_[i] = active[i];
    const int duration = kDurations[static_cast<std::size_t>(active[i].id)];
    if (active[i].internal_step + 1 >= duration) {
      out.terminated[i] = 1;
      last_completed_[i] = active[i].id;
    }
  }
  if (out.terminated[0] && out.terminated[1]) {
    out.reward = payoff_[static_cast<std::size_t>(active[0].id)][static_cast<std::size_t>(active[1].id)];
  }
  ++t_;
  done_ = t_ >= horizon_;
  out.done = done_;
  if (done_) {
    out.terminated.assign(2, 1);
  }
  return out;
}

VectorXd TinyAsync::macro_observation(int agent) const
{
  VectorXd obs = VectorXd::Zero(observation_size());
  const int last = last_completed_[static_cast<std::size_t>(agent)];
  obs(last < 0 ? kActions : last) = 1.0;
  return obs;
}

VectorXd TinyAsync::state_features() const
{
  VectorXd f = VectorXd::Zero(state_size());
  f(0) = static_cast<double>(t_) / horizon_;
  for (std::size_t i = 0; i < 2; ++i) {
    const int base = 1 + static_cast<int>(i) * (kActions + 1);
    if (running_[i].id >= 0) {
      f(base + running_[i].id) = 1.0;
      f(base + kActions) = static_cast<double>(running_[i].internal_step) / 3.0;
    }
  }
  return f;
}

std::string TinyAsync::render() const
{
  std::string out = "t=" + std::to_string(t_);
  for (std::size_t i = 0; i < 2; ++i) {
    out += " a" + std::to_string(i) + "=" + std::to_string(running_[i].id) + "@" +
      std::to_string(running_[i].internal_step);
  }
  return out + "\n";
}

double TinyAsync::optimal_return() const
{
  // Exhaustive search: state is (t, per-agent running action and progress).
  std::function<double(int, std::array<ActiveMacro, 2>, std::array<bool, 2>)> best =
    [&](int t, std::array<ActiveMacro, 2> run, std::array<bool, 2> needs_choice) -> double {
      if (t >= horizon_) {
        return 0.0;
      }
      double top = -1e300;
      for (int a0 = 0; a0 < kActions; ++a0) {
        if (!needs_choice[0] && a0 > 0) {break;}
        for (int a1 = 0; a1 < kActions; ++a1) {
          if (!needs_choice[1] && a1 > 0) {break;}
          std::array<ActiveMacro, 2> cur = run;
          if (needs_choice[0]) {cur[0] = {a0, 0};}
          if (needs_choice[1]) {cur[1] = {a1, 0};}
          std::array<bool, 2> term{};
          std::array<ActiveMacro, 2> after = cur;
          for (std::size_t i = 0; i < 2; ++i) {
            term[i] = cur[i].internal_step + 1 >= kDurations[static_cast<std::size_t>(cur[i].id)];
            after[i].internal_step += 1;
          }
          const double r = (term[0] && term[1]) ?
            payoff_[static_cast<std::size_t>(cur[0].id)][static_cast<std::size_t>(cur[1].id)] : 0.0;
          top = std::max(top, r + best(t + 1, after, term));
        }
      }
      return top;
    };
  return best(0, {}, {true, true});
}

std::unique_ptr<MacroEnv> make_env(const EnvConfig & config)
{
  if (config.name == "boxpushing") {
    return std::make_unique<BoxPushing>(config.grid_size, config.horizon);
  }
  if (config.name == "tiny-async") {
    return std::make_unique<TinyAsync>(config.horizon);
  }
  throw std::invalid_argument("unknown environment '" + config.name + "'");
}

}  // namespace tomac::env
