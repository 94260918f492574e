#pragma once

#include "tomac/env/macro_env.hpp"

#include <array>

namespace tomac::env
{

/// Two-agent matrix game with macro-actions of fixed durations 1, 2 and 3.
///
/// A payoff from the lookup table is paid on every step at which both agents' macro-actions
/// terminate together; otherwise the step reward is zero. Small enough to solve exactly.
class TinyAsync final : public MacroEnv
{
public:
  static constexpr int kActions = 3;
  static constexpr std::array<int, kActions> kDurations{1, 2, 3};
  using Payoff = std::array<std::array<double, kActions>, kActions>;

  static constexpr Payoff kDefaultPayoff{{{1.0, 0.0, 0.0}, {0.0, 3.0, 0.0}, {0.0, 0.0, 6.0}}};

  explicit TinyAsync(int horizon = 6, Payoff payoff = kDefaultPayoff);

  const Payoff & payoff() const {return payoff_;}

  std::string name() const override {return "tiny-async";}
  int num_agents() const override {return 2;}
  int num_macro_actions() const override {return kActions;}
  /// One-hot of the agent's last completed macro-action (slot kActions = none yet).
  int observation_size() const override {return kActions + 1;}
  int state_size() const override {return 1 + 2 * (kActions + 1);}
  int horizon() const override {return horizon_;}
  int time() const override {return t_;}
  bool done() const override {return done_;}
  void reset(std::uint64_t seed) override;
  std::vector<int> available_macro_actions(int agent) const override;
  std::string macro_action_name(int id) const override;
  StepOutcome advance(const std::vector<ActiveMacro> & active) override;
  VectorXd macro_observation(int agent) const override;
  VectorXd state_features() const override;
  std::string render() const override;
  std::unique_ptr<MacroEnv> clone() const override {return std::make_unique<TinyAsync>(*this);}

  /// Best achievable undiscounted return, by exhaustive search over joint decisions.
  double optimal_return() const;

private:
  int horizon_;
  Payoff payoff_;
  int t_ = 0;
  bool done_ = false;
  std::array<int, 2> last_completed_{-1, -1};
  std::array<ActiveMacro, 2> running_{};
};

}  // namespace tomac::env
