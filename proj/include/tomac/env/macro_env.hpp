#pragma once

#include "tomac/numerics/tensor.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace tomac::env
{

using numerics::VectorXd;

/// A macro-action in progress: which one, and how many primitive steps it has run.
struct ActiveMacro
{
  int id = -1;
  int internal_step = 0;
};

/// Result of one primitive timestep under concurrently executing macro-actions.
struct StepOutcome
{
  double reward = 0.0;
  /// Per-agent termination flag evaluated on the post-step state.
  std::vector<int> terminated;
  bool done = false;
};

/// The macro-action layer of a MacDec-POMDP as seen by the learner.
///
/// Implementations keep their world state internally; `advance` moves it forward by
/// one primitive timestep with each agent's low-level controller emitting one action.
class MacroEnv
{
public:
  virtual ~MacroEnv() = default;

  virtual std::string name() const = 0;
  virtual int num_agents() const = 0;
  virtual int num_macro_actions() const = 0;
  virtual int observation_size() const = 0;
  virtual int state_size() const = 0;
  virtual int horizon() const = 0;
  virtual int time() const = 0;
  virtual bool done() const = 0;

  virtual void reset(std::uint64_t seed) = 0;
  virtual std::vector<int> available_macro_actions(int agent) const = 0;
  virtual std::string macro_action_name(int id) const = 0;
  virtual StepOutcome advance(const std::vector<ActiveMacro> & active) = 0;
  virtual VectorXd macro_observation(int agent) const = 0;
  virtual VectorXd state_features() const = 0;
  virtual std::string render() const = 0;
  virtual std::unique_ptr<MacroEnv> clone() const = 0;
};

struct EnvConfig
{
  /// "boxpushing" or "tiny-async".
  std::string name = "boxpushing";
  int grid_size = 6;
  int horizon = 100;
};

/// Throws std::invalid_argument for unknown names or grid sizes.
std::unique_ptr<MacroEnv> make_env(const EnvConfig & config);

}  // namespace tomac::env
