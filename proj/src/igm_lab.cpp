#include "tomac/igm/lab.hpp"

#include <algorithm>
#include <sstream>

namespace tomac::igm
{

using numerics::ContractViolation;

namespace
{

// Advances a mixed-radix counter, last digit fastest, so tuples come out in lexicographic order.
bool next_tuple(std::vector<int> & digits, const std::vector<int> & radix)
{
  for (std::size_t k = digits.size(); k-- > 0; ) {
    if (++digits[k] < radix[k]) {
      return true;
    }
    digits[k] = 0;
  }
  return false;
}

}  // namespace

TabularInstance::TabularInstance(std::vector<AgentSpec> agents)
: agents_(std::move(agents))
{
  validate();
  for (const AgentSpec & a : agents_) {
    std::vector<int> offsets{0};
    for (int d : a.durations) {
      offsets.push_back(offsets.back() + d);
    }
    slot_offset_.push_back(offsets);
    q_.emplace_back(static_cast<std::size_t>(a.histories), VectorXd::Zero(offsets.back()));
    joint_histories_ *= a.histories;
    joint_slots_ *= offsets.back();
  }
  total_.assign(static_cast<std::size_t>(joint_histories_) * static_cast<std::size_t>(joint_slots_), 0.0);
}

void TabularInstance::validate() const
{
  if (agents_.empty()) {
    throw ContractViolation("tabular instance needs at least one agent");
  }
  for (const AgentSpec & a : agents_) {
    if (a.durations.empty() || a.histories < 1) {
      throw ContractViolation("every agent needs a macro-action and a history");
    }
    for (int d : a.durations) {
      if (d < 1) {
        throw ContractViolation("macro-action durations must be at least 1");
      }
    }
  }
  if (!q_.empty()) {
    for (std::size_t i = 0; i < agents_.size(); ++i) {
      if (q_[i].size() != static_cast<std::size_t>(agents_[i].histories)) {
        throw ContractViolation("utility table has the wrong number of histories");
      }
      for (const VectorXd & row : q_[i]) {
        if (row.size() != slot_offset_[i].back()) {
          throw ContractViolation("utility table has the wrong number of slots");
        }
      }
    }
    if (total_.size() != static_cast<std::size_t>(joint_histories_) * static_cast<std::size_t>(joint_slots_)) {
      throw ContractViolation("joint table does not match the agents");
    }
  }
}

int TabularInstance::slot(int i, int a, int progress) const
{
  if (a < 0 || a >= num_actions(i) || progress < 0 || progress >= duration(i, a)) {
    throw ContractViolation(
            "agent " + std::to_string(i) + " has no macro-action " + std::to_string(a) +
            " at progress " + std::to_string(progress));
  }
  return slot_offset_[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)] + progress;
}

double & TabularInstance::q(int i, int h, int a, int progress)
{
  return q_[static_cast<std::size_t>(i)][static_cast<std::size_t>(h)](slot(i, a, progress));
}

double TabularInstance::q(int i, int h, int a, int progress) const
{
  return q_[static_cast<std::size_t>(i)][static_cast<std::size_t>(h)](slot(i, a, progress));
}

std::size_t TabularInstance::total_index(
  int joint_history, const std::vector<int> & actions, const std::vector<int> & progress) const
{
  std::size_t js = 0;
  for (int i = 0; i < num_agents(); ++i) {
    js = js * static_cast<std::size_t>(num_slots(i)) +
      static_cast<std::size_t>(slot(i, actions[static_cast<std::size_t>(i)], progress[static_cast<std::size_t>(i)]));
  }
  return static_cast<std::size_t>(joint_history) * static_cast<std::size_t>(joint_slots_) + js;
}

double & TabularInstance::total(
  int joint_history, const std::vector<int> & actions, const std::vector<int> & progress)
{
  return total_[total_index(joint_history, actions, progress)];
}

double TabularInstance::total(
  int joint_history, const std::vector<int> & actions, const std::vector<int> & progress) const
{
  return total_[total_index(joint_history, actions, progress)];
}

int TabularInstance::joint_history(const std::vector<int> & histories) const
{
  int jh = 0;
  for (int i = 0; i < num_agents(); ++i) {
    jh = jh * agent(i).histories + histories[static_cast<std::size_t>(i)];
  }
  return jh;
}

std::vector<int> TabularInstance::split_history(int joint_history) const
{
  std::vector<int> h(static_cast<std::size_t>(num_agents()));
  for (int i = num_agents(); i-- > 0; ) {
    h[static_cast<std::size_t>(i)] = joint_history % agent(i).histories;
    joint_history /= agent(i).histories;
  }
  return h;
}

void TabularInstance::fill_total(const std::function<double(int, const VectorXd &)> & f)
{
  const int n = num_agents();
  std::vector<int> radix;
  for (int i = 0; i < n; ++i) {
    radix.push_back(num_slots(i));
  }
  VectorXd q_vec(n);
  for (int jh = 0; jh < joint_histories_; ++jh) {
    const std::vector<int> h = split_history(jh);
    std::vector<int> slots(static_cast<std::size_t>(n), 0);
    std::size_t js = 0;
    do {
      for (int i = 0; i < n; ++i) {
        q_vec(i) = q_[static_cast<std::size_t>(i)][static_cast<std::size_t>(h[static_cast<std::size_t>(i)])](
          slots[static_cast<std::size_t>(i)]);
      }
      total_[static_cast<std::size_t>(jh) * static_cast<std::size_t>(joint_slots_) + js++] = f(jh, q_vec);
    } while (next_tuple(slots, radix));
  }
}

void make_additive(TabularInstance & inst)
{
  inst.fill_total([](int, const VectorXd & q) {return q.sum();});
}

void make_monotone(TabularInstance & inst, const std::vector<model::MixValues> & per_history)
{
  if (per_history.size() != static_cast<std::size_t>(inst.joint_histories())) {
    throw ContractViolation("one mixer parameter set is needed per joint history");
  }
  inst.fill_total([&](int jh, const VectorXd & q) {
      return model::mix_value(q, per_history[static_cast<std::size_t>(jh)]);
    });
}

// ----------------------------------------------------------------------------
// Checks

void for_each_situation(const TabularInstance & inst, const std::function<void(const Situation &)> & f)
{
  const int n = inst.num_agents();
  for (int jh = 0; jh < inst.joint_histories(); ++jh) {
    Situation s;
    s.histories = inst.split_history(jh);
    for (unsigned mask = 1; mask < (1u << n); ++mask) {
      s.terminated.assign(static_cast<std::size_t>(n), 0);
      // Pinning options for each continuing agent: (macro-action, progress >= 1).
      std::vector<std::vector<std::pair<int, int>>> options(static_cast<std::size_t>(n));
      bool feasible = true;
      for (int i = 0; i < n; ++i) {
        auto & opts = options[static_cast<std::size_t>(i)];
        if (mask & (1u << i)) {
          s.terminated[static_cast<std::size_t>(i)] = 1;
          opts.emplace_back(-1, 0);
          continue;
        }
        for (int a = 0; a < inst.num_actions(i); ++a) {
          for (int p = 1; p < inst.duration(i, a); ++p) {
            opts.emplace_back(a, p);
          }
        }
        feasible = feasible && !opts.empty();
      }
      if (!feasible) {
        continue;
      }
      std::vector<int> radix;
      for (const auto & opts : options) {
        radix.push_back(static_cast<int>(opts.size()));
      }
      std::vector<int> pick(static_cast<std::size_t>(n), 0);
      do {
        s.pinned_action.clear();
        s.pinned_progress.clear();
        for (int i = 0; i < n; ++i) {
          const auto & o = options[static_cast<std::size_t>(i)][static_cast<std::size_t>(pick[static_cast<std::size_t>(i)])];
          s.pinned_action.push_back(o.first);
          s.pinned_progress.push_back(o.second);
        }
        f(s);
      } while (next_tuple(pick, radix));
    }
  }
}

std::vector<std::vector<int>> joint_argmax(const TabularInstance & inst, const Situation & s)
{
  const int n = inst.num_agents();
  const int jh = inst.joint_history(s.histories);
  std::vector<int> free_agents;
  std::vector<int> radix;
  for (int i = 0; i < n; ++i) {
    if (s.terminated[static_cast<std::size_t>(i)]) {
      free_agents.push_back(i);
      radix.push_back(inst.num_actions(i));
    }
  }
  std::vector<int> actions = s.pinned_action;
  std::vector<int> progress = s.pinned_progress;
  for (int i : free_agents) {
    progress[static_cast<std::size_t>(i)] = 0;
  }
  std::vector<std::vector<int>> best;
  double best_value = 0.0;
  std::vector<int> choice(free_agents.size(), 0);
  do {
    for (std::size_t k = 0; k < free_agents.size(); ++k) {
      actions[static_cast<std::size_t>(free_agents[k])] = choice[k];
    }
    const double v = inst.total(jh, actions, progress);
    if (best.empty() || v > best_value) {
      best.assign(1, choice);
      best_value = v;
    } else if (v == best_value) {
      best.push_back(choice);
    }
  } while (next_tuple(choice, radix));
  return best;
}

namespace
{

std::vector<int> argmax_set(const std::vector<double> & values)
{
  std::vector<int> best;
  for (int a = 0; a < static_cast<int>(values.size()); ++a) {
    if (best.empty() || values[static_cast<std::size_t>(a)] > values[static_cast<std::size_t>(best[0])]) {
      best.assign(1, a);
    } else if (values[static_cast<std::size_t>(a)] == values[static_cast<std::size_t>(best[0])]) {
      best.push_back(a);
    }
  }
  return best;
}

std::vector<int> agent_argmax(const TabularInstance & inst, int i, int h)
{
  std::vector<double> values;
  for (int a = 0; a < inst.num_actions(i); ++a) {
    values.push_back(inst.q(i, h, a, 0));
  }
  return argmax_set(values);
}

std::vector<std::vector<int>> product(const std::vector<std::vector<int>> & sets)
{
  std::vector<std::vector<int>> out;
  std::vector<int> radix;
  for (const auto & s : sets) {
    radix.push_back(static_cast<int>(s.size()));
  }
  std::vector<int> idx(sets.size(), 0);
  do {
    std::vector<int> tuple;
    for (std::size_t k = 0; k < sets.size(); ++k) {
      tuple.push_back(sets[k][static_cast<std::size_t>(idx[k])]);
    }
    out.push_back(std::move(tuple));
  } while (next_tuple(idx, radix));
  return out;
}

}  // namespace

std::vector<std::vector<int>> individual_argmax(const TabularInstance & inst, const Situation & s)
{
  std::vector<std::vector<int>> sets;
  for (int i = 0; i < inst.num_agents(); ++i) {
    if (s.terminated[static_cast<std::size_t>(i)]) {
      sets.push_back(agent_argmax(inst, i, s.histories[static_cast<std::size_t>(i)]));
    }
  }
  return product(sets);
}

CheckResult check_tomacigm(const TabularInstance & inst)
{
  CheckResult result;
  for_each_situation(inst, [&](const Situation & s) {
      ++result.situations;
      if (!result.pass) {
        return;
      }
      auto joint = joint_argmax(inst, s);
      auto individual = individual_argmax(inst, s);
      if (joint != individual) {
        result.pass = false;
        result.witness = Witness{s, std::move(joint), std::move(individual)};
      }
    });
  return result;
}

CheckResult check_igm(const TabularInstance & inst)
{
  const int n = inst.num_agents();
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < inst.num_actions(i); ++a) {
      if (inst.duration(i, a) != 1) {
        throw ContractViolation("the IGM check needs every macro-action to last one step");
      }
    }
  }
  CheckResult result;
  const std::vector<int> zeros(static_cast<std::size_t>(n), 0);
  std::vector<int> radix;
  for (int i = 0; i < n; ++i) {
    radix.push_back(inst.num_actions(i));
  }
  for (int jh = 0; jh < inst.joint_histories() && result.pass; ++jh) {
    ++result.situations;
    const std::vector<int> h = inst.split_history(jh);
    // argmax over every joint action of Q_total(ĥ, ·)
    std::vector<std::vector<int>> joint;
    double best = 0.0;
    std::vector<int> u(static_cast<std::size_t>(n), 0);
    do {
      const double v = inst.total(jh, u, zeros);
      if (joint.empty() || v > best) {
        joint.assign(1, u);
        best = v;
      } else if (v == best) {
        joint.push_back(u);
      }
    } while (next_tuple(u, radix));
    // tuple of individual argmaxes of Q_i(h_i, ·)
    std::vector<std::vector<int>> sets;
    for (int i = 0; i < n; ++i) {
      sets.push_back(agent_argmax(inst, i, h[static_cast<std::size_t>(i)]));
    }
    auto individual = product(sets);
    if (joint != individual) {
      result.pass = false;
      Situation s{h, std::vector<int>(static_cast<std::size_t>(n), 1),
        std::vector<int>(static_cast<std::size_t>(n), -1), zeros};
      result.witness = Witness{s, std::move(joint), std::move(individual)};
    }
  }
  return result;
}

ReductionResult check_reduction_to_igm(const TabularInstance & inst)
{
  return {check_tomacigm(inst).pass, check_igm(inst).pass};
}

Offsets random_offsets(const TabularInstance & inst, std::mt19937_64 & rng, double magnitude)
{
  // Multiples of 1/32 keep every subtraction exact for magnitudes below 2^40.
  const auto limit = static_cast<long long>(magnitude * 32.0);
  std::uniform_int_distribution<long long> pick(-limit, limit);
  Offsets v;
  for (int i = 0; i < inst.num_agents(); ++i) {
    std::vector<double> row;
    for (int h = 0; h < inst.agent(i).histories; ++h) {
      row.push_back(static_cast<double>(pick(rng)) / 32.0);
    }
    v.agent.push_back(std::move(row));
  }
  for (int jh = 0; jh < inst.joint_histories(); ++jh) {
    v.joint.push_back(static_cast<double>(pick(rng)) / 32.0);
  }
  return v;
}

TabularInstance subtract(const TabularInstance & inst, const Offsets & v)
{
  TabularInstance out = inst;
  for (int i = 0; i < out.num_agents(); ++i) {
    auto & tables = out.agent_tables(i);
    for (std::size_t h = 0; h < tables.size(); ++h) {
      tables[h].array() -= v.agent[static_cast<std::size_t>(i)][h];
    }
  }
  auto & total = out.total_table();
  const auto slots = static_cast<std::size_t>(out.joint_slots());
  for (std::size_t k = 0; k < total.size(); ++k) {
    total[k] -= v.joint[k / slots];
  }
  return out;
}

AdvResult check_adv_equivalence(const TabularInstance & inst, const Offsets & v)
{
  const TabularInstance shifted = subtract(inst, v);
  AdvResult result;
  auto compare = [&](bool same) {
      ++result.comparisons;
      if (!same) {
        ++result.changes;
        result.pass = false;
      }
    };
  for (int i = 0; i < inst.num_agents(); ++i) {
    for (int h = 0; h < inst.agent(i).histories; ++h) {
      compare(agent_argmax(inst, i, h) == agent_argmax(shifted, i, h));
    }
  }
  for_each_situation(inst, [&](const Situation & s) {
      compare(joint_argmax(inst, s) == joint_argmax(shifted, s));
    });
  return result;
}

// ----------------------------------------------------------------------------
// Generators

double dyadic(std::mt19937_64 & rng)
{
  return static_cast<double>(std::uniform_int_distribution<int>(-64, 64)(rng)) / 32.0;
}

TabularInstance random_shape(
  std::mt19937_64 & rng, const std::vector<int> & action_counts, int max_duration, int histories)
{
  std::uniform_int_distribution<int> dur(1, max_duration);
  std::vector<AgentSpec> agents;
  for (int count : action_counts) {
    AgentSpec a;
    a.histories = histories;
    for (int k = 0; k < count; ++k) {
      a.durations.push_back(dur(rng));
    }
    agents.push_back(std::move(a));
  }
  return TabularInstance(std::move(agents));
}

void randomize_utilities(TabularInstance & inst, std::mt19937_64 & rng)
{
  for (int i = 0; i < inst.num_agents(); ++i) {
    for (VectorXd & row : inst.agent_tables(i)) {
      for (Eigen::Index k = 0; k < row.size(); ++k) {
        row(k) = dyadic(rng);
      }
    }
  }
}

model::MixValues random_mix(std::mt19937_64 & rng, int agents, int hidden)
{
  std::uniform_real_distribution<double> weight(0.05, 1.0);
  std::uniform_real_distribution<double> bias(-1.0, 1.0);
  model::MixValues p;
  p.w1.resize(agents, hidden);
  p.b1.resize(hidden);
  p.w2.resize(hidden);
  for (Eigen::Index r = 0; r < p.w1.rows(); ++r) {
    for (Eigen::Index c = 0; c < p.w1.cols(); ++c) {
      p.w1(r, c) = weight(rng);
    }
  }
  for (Eigen::Index k = 0; k < hidden; ++k) {
    p.b1(k) = bias(rng);
    p.w2(k) = weight(rng);
  }
  p.b2 = bias(rng);
  return p;
}

TabularInstance xor_instance()
{
  TabularInstance inst({AgentSpec{{1, 1}, 1}, AgentSpec{{1, 1}, 1}});
  inst.fill_total([](int, const VectorXd &) {return 0.0;});
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      inst.total(0, {a, b}, {0, 0}) = a != b ? 1.0 : 0.0;
    }
  }
  return inst;
}

std::vector<TabularInstance> duration_one_grid()
{
  const TabularInstance shape({AgentSpec{{1, 1}, 1}, AgentSpec{{1, 1}, 1}});
  std::vector<TabularInstance> out;
  std::vector<int> digits(8, 0);
  const std::vector<int> radix(8, 3);
  do {
    TabularInstance inst = shape;
    auto value = [&](int k) {return static_cast<double>(digits[static_cast<std::size_t>(k)] - 1);};
    for (int a = 0; a < 2; ++a) {
      inst.q(0, 0, a, 0) = value(a);
      inst.q(1, 0, a, 0) = value(2 + a);
      for (int b = 0; b < 2; ++b) {
        inst.total(0, {a, b}, {0, 0}) = value(4 + 2 * a + b);
      }
    }
    out.push_back(std::move(inst));
  } while (next_tuple(digits, radix));
  return out;
}

StrictnessWitness strictness_witness()
{
  StrictnessWitness w;
  w.instance = TabularInstance({AgentSpec{{2, 1}, 1}, AgentSpec{{1, 1}, 1}});
  TabularInstance & inst = w.instance;
  inst.q(0, 0, 0, 0) = 1.0;
  inst.q(0, 0, 0, 1) = 0.5;
  inst.q(0, 0, 1, 0) = 0.0;
  inst.q(1, 0, 0, 0) = 0.25;
  inst.q(1, 0, 1, 0) = 0.0;
  make_additive(inst);
  w.agent = 0;
  w.action = 0;
  w.q_start = inst.q(0, 0, 0, 0);
  w.q_later = inst.q(0, 0, 0, 1);
  w.consistent = check_tomacigm(inst).pass && w.q_start != w.q_later;
  return w;
}

// ----------------------------------------------------------------------------
// Lab driver

namespace
{

void validate_options(const LabOptions & o)
{
  auto in_range = [](const char * what, int v, int lo, int hi) {
      if (v < lo || v > hi) {
        throw ContractViolation(
                std::string(what) + " must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
      }
    };
  in_range("max_agents", o.max_agents, 1, 3);
  in_range("max_actions", o.max_actions, 1, 4);
  in_range("max_duration", o.max_duration, 1, 3);
  in_range("histories", o.histories, 1, 4);
  in_range("draws_per_shape", o.draws_per_shape, 1, 1 << 20);
  in_range("adv_draws", o.adv_draws, 0, 1 << 24);
  in_range("counterexample_attempts", o.counterexample_attempts, 0, 1 << 20);
}

}  // namespace

LabReport run_lab(const LabOptions & options)
{
  validate_options(options);
  LabReport report;
  report.options = options;
  std::mt19937_64 rng(options.seed);

  // Sufficiency: every shape up to the limits, random tables and monotone mixers.
  for (int n = 1; n <= options.max_agents; ++n) {
    std::vector<int> counts(static_cast<std::size_t>(n), 0);
    const std::vector<int> radix(static_cast<std::size_t>(n), options.max_actions);
    do {
      std::vector<int> actions;
      for (int c : counts) {
        actions.push_back(c + 1);
      }
      for (int d = 0; d < options.draws_per_shape; ++d) {
        TabularInstance inst = random_shape(rng, actions, options.max_duration, options.histories);
        randomize_utilities(inst, rng);
        if (d == 0) {
          TabularInstance additive = inst;
          make_additive(additive);
          if (!check_tomacigm(additive).pass) {
            ++report.additive_failures;
          }
        }
        std::vector<model::MixValues> mixes;
        for (int jh = 0; jh < inst.joint_histories(); ++jh) {
          mixes.push_back(random_mix(rng, n, 4));
        }
        make_monotone(inst, mixes);
        const CheckResult r = check_tomacigm(inst);
        ++report.sufficiency_instances;
        report.sufficiency_situations += r.situations;
        if (!r.pass) {
          report.sufficiency_failures.push_back(*r.witness);
        }
      }
    } while (next_tuple(counts, radix));
  }

  for (const TabularInstance & inst : duration_one_grid()) {
    const ReductionResult r = check_reduction_to_igm(inst);
    ++report.reduction_instances;
    report.reduction_tomac_pass += r.tomacigm;
    report.reduction_igm_pass += r.igm;
    report.reduction_disagreements += !r.agree();
  }

  report.strictness = strictness_witness();

  std::uniform_int_distribution<int> agents_dist(1, options.max_agents);
  std::uniform_int_distribution<int> actions_dist(1, options.max_actions);
  for (int d = 0; d < options.adv_draws; ++d) {
    std::vector<int> actions(static_cast<std::size_t>(agents_dist(rng)));
    for (int & a : actions) {
      a = actions_dist(rng);
    }
    TabularInstance inst = random_shape(rng, actions, options.max_duration, options.histories);
    randomize_utilities(inst, rng);
    for (double & v : inst.total_table()) {
      v = dyadic(rng);
    }
    const AdvResult r = check_adv_equivalence(inst, random_offsets(inst, rng, 1 << 20));
    ++report.adv_draws;
    report.adv_comparisons += r.comparisons;
    report.adv_changes += r.changes;
  }

  // Counterexamples: the XOR payoff, then mixers that decrease in at least one agent.
  if (auto w = check_tomacigm(xor_instance()).witness) {
    report.counterexamples.push_back(*w);
  }
  for (int attempt = 0; attempt < options.counterexample_attempts; ++attempt) {
    const int n = std::max(2, agents_dist(rng));
    std::vector<int> actions(static_cast<std::size_t>(n));
    for (int & a : actions) {
      a = std::max(2, actions_dist(rng));
    }
    TabularInstance inst = random_shape(rng, actions, options.max_duration, 1);
    randomize_utilities(inst, rng);
    VectorXd signs = VectorXd::Ones(inst.num_agents());
    signs(std::uniform_int_distribution<int>(0, inst.num_agents() - 1)(rng)) = -1.0;
    const model::MixValues mix = random_mix(rng, inst.num_agents(), 4);
    inst.fill_total([&](int, const VectorXd & q) {return model::mix_value(signs.cwiseProduct(q), mix);});
    const CheckResult r = check_tomacigm(inst);
    if (!r.pass) {
      ++report.generated_failures;
      if (static_cast<int>(report.counterexamples.size()) <= options.max_counterexamples) {
        report.counterexamples.push_back(*r.witness);
      }
    }
  }
  return report;
}

json to_json(const Witness & w)
{
  return {
    {"histories", w.situation.histories},
    {"terminated", w.situation.terminated},
    {"pinned_action", w.situation.pinned_action},
    {"pinned_progress", w.situation.pinned_progress},
    {"joint_argmax", w.joint_argmax},
    {"individual_argmax", w.individual_argmax}};
}

json to_json(const LabReport & r)
{
  const LabOptions & o = r.options;
  json failures = json::array();
  for (const Witness & w : r.sufficiency_failures) {
    failures.push_back(to_json(w));
  }
  json counter = json::array();
  for (const Witness & w : r.counterexamples) {
    counter.push_back(to_json(w));
  }
  json j;
  j["format_version"] = 1;
  j["seed"] = o.seed;
  j["sizes"] = {
    {"max_agents", o.max_agents}, {"max_actions", o.max_actions}, {"max_duration", o.max_duration},
    {"histories", o.histories}, {"draws_per_shape", o.draws_per_shape}, {"adv_draws", o.adv_draws},
    {"counterexample_attempts", o.counterexample_attempts}};
  j["sufficiency"] = {
    {"pass", r.sufficiency_pass()}, {"instances", r.sufficiency_instances},
    {"situations", r.sufficiency_situations}, {"additive_failures", r.additive_failures},
    {"failures", failures}};
  j["reduction"] = {
    {"pass", r.reduction_pass()}, {"instances", r.reduction_instances},
    {"disagreements", r.reduction_disagreements}, {"tomacigm_pass", r.reduction_tomac_pass},
    {"igm_pass", r.reduction_igm_pass}};
  j["strictness"] = {
    {"pass", r.strictness.consistent}, {"agent", r.strictness.agent}, {"action", r.strictness.action},
    {"duration", r.strictness.instance.num_agents() > 0 ?
      r.strictness.instance.duration(r.strictness.agent, r.strictness.action) : 0},
    {"q_progress_0", r.strictness.q_start}, {"q_progress_1", r.strictness.q_later}};
  j["adv_equivalence"] = {
    {"pass", r.adv_pass()}, {"draws", r.adv_draws}, {"comparisons", r.adv_comparisons},
    {"changes", r.adv_changes}};
  j["counterexamples"] = {
    {"pass", r.counterexample_pass()}, {"generated_failures", r.generated_failures},
    {"witnesses", counter}};
  j["pass"] = r.pass();
  return j;
}

std::string format_report(const LabReport & r)
{
  auto verdict = [](bool ok) {return ok ? "PASS" : "FAIL";};
  std::ostringstream out;
  out << "sufficiency      " << verdict(r.sufficiency_pass()) << "  " << r.sufficiency_instances
      << " monotone instances, " << r.sufficiency_situations << " situations, "
      << r.sufficiency_failures.size() << " failures\n";
  out << "reduction        " << verdict(r.reduction_pass()) << "  " << r.reduction_instances
      << " duration-1 instances, " << r.reduction_disagreements << " disagreements ("
      << r.reduction_tomac_pass << " consistent)\n";
  out << "strictness       " << verdict(r.strictness.consistent) << "  agent " << r.strictness.agent
      << " action " << r.strictness.action << ": Q = " << r.strictness.q_start << " at progress 0, "
      << r.strictness.q_later << " at progress 1\n";
  out << "adv-equivalence  " << verdict(r.adv_pass()) << "  " << r.adv_draws << " offset draws, "
      << r.adv_comparisons << " argmax comparisons, " << r.adv_changes << " changes\n";
  out << "counterexamples  " << verdict(r.counterexample_pass()) << "  " << r.counterexamples.size()
      << " witnesses, " << r.generated_failures << " generated failures\n";
  for (const Witness & w : r.sufficiency_failures) {
    out << "  sufficiency witness: " << to_json(w).dump() << '\n';
  }
  if (!r.counterexamples.empty()) {
    out << "  first counterexample: " << to_json(r.counterexamples.front()).dump() << '\n';
  }
  out << "overall          " << verdict(r.pass()) << '\n';
  return out.str();
}

}  // namespace tomac::igm
