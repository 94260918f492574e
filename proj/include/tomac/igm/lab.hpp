#pragma once

#include "tomac/model/mixer.hpp"

#include "json.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

namespace tomac::igm
{

using json = nlohmann::ordered_json;
using numerics::VectorXd;

struct AgentSpec
{
  std::vector<int> durations;  // one per macro-action, each at least 1
  int histories = 1;
};

/// Enumerable To-Mac-IGM instance. Each agent's table is indexed by (history, slot), where
/// slot enumerates (macro-action, progress) pairs; the joint table is indexed by joint
/// history and joint slot in mixed radix with agent 0 most significant.
class TabularInstance
{
public:
  TabularInstance() = default;
  explicit TabularInstance(std::vector<AgentSpec> agents);

  int num_agents() const {return static_cast<int>(agents_.size());}
  const AgentSpec & agent(int i) const {return agents_[static_cast<std::size_t>(i)];}
  int num_actions(int i) const {return static_cast<int>(agent(i).durations.size());}
  int duration(int i, int a) const {return agent(i).durations[static_cast<std::size_t>(a)];}
  int num_slots(int i) const {return slot_offset_[static_cast<std::size_t>(i)].back();}
  int slot(int i, int a, int progress) const;
  int joint_histories() const {return joint_histories_;}
  int joint_slots() const {return joint_slots_;}

  double & q(int i, int h, int a, int progress);
  double q(int i, int h, int a, int progress) const;
  double & total(int joint_history, const std::vector<int> & actions, const std::vector<int> & progress);
  double total(int joint_history, const std::vector<int> & actions, const std::vector<int> & progress) const;

  int joint_history(const std::vector<int> & histories) const;
  std::vector<int> split_history(int joint_history) const;

  /// Sets every Q_total entry to f(joint history, per-agent utilities).
  void fill_total(const std::function<double(int, const VectorXd &)> & f);

  /// Throws ContractViolation on inconsistent shapes or durations below 1.
  void validate() const;

  std::vector<VectorXd> & agent_tables(int i) {return q_[static_cast<std::size_t>(i)];}
  std::vector<double> & total_table() {return total_;}

private:
  std::size_t total_index(int joint_history, const std::vector<int> & actions, const std::vector<int> & progress) const;

  std::vector<AgentSpec> agents_;
  std::vector<std::vector<int>> slot_offset_;
  std::vector<std::vector<VectorXd>> q_;  // [agent][history] -> slot values
  std::vector<double> total_;
  int joint_histories_ = 1;
  int joint_slots_ = 1;
};

void make_additive(TabularInstance & inst);

/// Q_total through the shipped mixer, with one parameter set per joint history.
void make_monotone(TabularInstance & inst, const std::vector<model::MixValues> & per_history);

/// Agents' choice situation: terminated agents pick at progress 0, the rest are pinned.
struct Situation
{
  std::vector<int> histories;
  std::vector<int> terminated;      // 0/1 per agent
  std::vector<int> pinned_action;   // -1 for terminated agents
  std::vector<int> pinned_progress;
};

struct Witness
{
  Situation situation;
  /// Joint argmax over the terminated agents' actions, in agent order.
  std::vector<std::vector<int>> joint_argmax;
  /// Cartesian product of the terminated agents' individual argmax sets.
  std::vector<std::vector<int>> individual_argmax;
};

struct CheckResult
{
  bool pass = true;
  long situations = 0;
  std::optional<Witness> witness;
};

/// Calls f for every joint history, non-empty terminated set and pinning of the
/// continuing agents to an in-progress macro-action.
void for_each_situation(const TabularInstance & inst, const std::function<void(const Situation &)> & f);

/// Constrained joint argmax of Q_total in one situation.
std::vector<std::vector<int>> joint_argmax(const TabularInstance & inst, const Situation & s);

/// Product of individual argmax sets of the terminated agents at progress 0.
std::vector<std::vector<int>> individual_argmax(const TabularInstance & inst, const Situation & s);

/// To-Mac-IGM consistency. The situation with no terminated agent is vacuous and skipped.
CheckResult check_tomacigm(const TabularInstance & inst);

/// Plain IGM over the full joint action space. Requires every duration to be 1.
CheckResult check_igm(const TabularInstance & inst);

struct ReductionResult
{
  bool tomacigm = false;
  bool igm = false;
  bool agree() const {return tomacigm == igm;}
};

ReductionResult check_reduction_to_igm(const TabularInstance & inst);

/// Per-agent offsets V_i(h) and joint offsets V(ĥ) subtracted from the tables.
struct Offsets
{
  std::vector<std::vector<double>> agent;
  std::vector<double> joint;
};

Offsets random_offsets(const TabularInstance & inst, std::mt19937_64 & rng, double magnitude);
TabularInstance subtract(const TabularInstance & inst, const Offsets & v);

struct AdvResult
{
  bool pass = true;
  long comparisons = 0;
  long changes = 0;
};

/// Compares individual argmax sets at progress 0 and every constrained joint argmax set.
AdvResult check_adv_equivalence(const TabularInstance & inst, const Offsets & v);

// ----------------------------------------------------------------------------
// Generators

/// Dyadic values k / 32 with |k| <= 64: ties are common and offsets stay exact.
double dyadic(std::mt19937_64 & rng);

TabularInstance random_shape(
  std::mt19937_64 & rng, const std::vector<int> & action_counts, int max_duration, int histories);
void randomize_utilities(TabularInstance & inst, std::mt19937_64 & rng);
/// Strictly positive mixing weights, so the mix is strictly increasing in every utility.
model::MixValues random_mix(std::mt19937_64 & rng, int agents, int hidden);

TabularInstance xor_instance();

/// All n = 2, |M| = 2, duration-1 instances over the value grid {-1, 0, 1}.
std::vector<TabularInstance> duration_one_grid();

struct StrictnessWitness
{
  TabularInstance instance;
  int agent = 0;
  int action = 0;
  double q_start = 0.0;
  double q_later = 0.0;
  bool consistent = false;
};

/// A consistent instance whose utilities depend on execution progress, so no
/// duration-1 instance carries the same tables.
StrictnessWitness strictness_witness();

// ----------------------------------------------------------------------------
// Report

struct LabOptions
{
  std::uint64_t seed = 0;
  int max_agents = 3;
  int max_actions = 4;
  int max_duration = 3;
  int histories = 4;
  int draws_per_shape = 12;
  int adv_draws = 1000;
  int counterexample_attempts = 200;
  int max_counterexamples = 3;
};

struct LabReport
{
  LabOptions options;
  long sufficiency_instances = 0;
  long sufficiency_situations = 0;
  long additive_failures = 0;
  std::vector<Witness> sufficiency_failures;
  long reduction_instances = 0;
  long reduction_disagreements = 0;
  long reduction_tomac_pass = 0;
  long reduction_igm_pass = 0;
  StrictnessWitness strictness;
  long adv_draws = 0;
  long adv_comparisons = 0;
  long adv_changes = 0;
  std::vector<Witness> counterexamples;
  long generated_failures = 0;

  bool sufficiency_pass() const {return sufficiency_failures.empty() && additive_failures == 0;}
  bool reduction_pass() const {return reduction_disagreements == 0;}
  bool adv_pass() const {return adv_changes == 0;}
  bool counterexample_pass() const {return generated_failures > 0;}
  bool pass() const
  {
    return sufficiency_pass() && reduction_pass() && adv_pass() && strictness.consistent &&
           counterexample_pass();
  }
};

LabReport run_lab(const LabOptions & options);

json to_json(const Witness & w);
json to_json(const LabReport & report);
std::string format_report(const LabReport & report);

}  // namespace tomac::igm
