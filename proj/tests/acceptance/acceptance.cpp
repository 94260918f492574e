// Acceptance checks. Prints one PASS/FAIL line per criterion and exits non-zero if any
// selected criterion fails. Arguments select criteria by number (default: all).

#include "tomac/env/boxpushing.hpp"
#include "tomac/igm/lab.hpp"
#include "tomac/model/network.hpp"
#include "tomac/numerics/gradcheck.hpp"
#include "tomac/numerics/ops.hpp"
#include "tomac/train/trainer.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using namespace tomac;
using numerics::GradCheckOptions;
using numerics::GradCheckReport;
using numerics::ParamBundle;
using numerics::Tape;
using numerics::Var;
using numerics::VectorXd;
using MatrixXd = numerics::Matrix<double>;

namespace
{

struct Verdict
{
  bool pass = false;
  std::string detail;
};

class Stopwatch
{
public:
  double seconds() const
  {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double x, int digits = 3)
{
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << x;
  return ss.str();
}

MatrixXd random_matrix(std::mt19937_64 & rng, Eigen::Index r, Eigen::Index c, double scale = 1.0)
{
  std::uniform_real_distribution<double> u(-scale, scale);
  MatrixXd m(r, c);
  for (Eigen::Index k = 0; k < m.size(); ++k) {m.data()[k] = u(rng);}
  return m;
}

Var probe(Tape & tape, const Var & out, const MatrixXd & w)
{
  return numerics::sum(numerics::cwise_product(out, tape.constant(w)));
}

ParamBundle with_prefix(const ParamBundle & all, const std::string & prefix)
{
  ParamBundle p;
  for (const auto & [path, value] : all.tensors) {
    if (path.rfind(prefix, 0) == 0) {p.tensors[path] = value;}
  }
  return p;
}

// ----------------------------------------------------------------------------
// 1. Gradient integrity

model::ModelConfig small_model(std::mt19937_64 & rng)
{
  std::uniform_int_distribution<int> coin(0, 1);
  model::ModelConfig cfg;
  cfg.num_agents = 2 + coin(rng);
  cfg.num_actions = 3;
  cfg.obs_size = 2;
  cfg.state_size = 3;
  cfg.time_dim = coin(rng) == 1 ? 2 : 0;
  cfg.hidden = 4;
  cfg.attention_dim = 4;
  cfg.mixer_hidden = 3;
  cfg.share_parameters = coin(rng) == 1;
  cfg.atpg = coin(rng) == 1;
  cfg.delta = coin(rng) == 1 ? 0.3 : 0.0;
  return cfg;
}

GradCheckReport fd_agent_net(std::mt19937_64 & rng, std::uint64_t seed)
{
  const model::ModelConfig cfg = small_model(rng);
  const int agent = cfg.share_parameters ? 0 : 1;
  ParamBundle p = with_prefix(model::init_model(cfg, seed), model::agent_prefix(cfg, agent));
  const Eigen::Index rows = 1 + static_cast<Eigen::Index>(seed % 3);
  p.tensors["h0"] = random_matrix(rng, rows, cfg.hidden);
  p.tensors["tok"] = random_matrix(rng, rows, cfg.token_size());
  const MatrixXd wq = random_matrix(rng, rows, cfg.num_actions);
  const MatrixXd wh = random_matrix(rng, rows, cfg.hidden);
  auto loss = [&](Tape & t, const ParamBundle & params) {
      const model::QOutput o = model::q_forward(
        model::bind_agent_net(t, params, cfg, agent), t.param(params, "h0"), t.param(params, "tok"));
      return probe(t, o.q, wq) + probe(t, o.hidden, wh);
    };
  return numerics::check_gradients(loss, p);
}

GradCheckReport fd_temporal(std::mt19937_64 & rng, std::uint64_t seed)
{
  model::ModelConfig cfg = small_model(rng);
  cfg.time_dim = 2;
  cfg.atpg = true;
  ParamBundle p = with_prefix(model::init_model(cfg, seed), "atpg.t");
  std::uniform_int_distribution<int> len(1, 4);
  const std::vector<Eigen::Index> lengths{len(rng), len(rng)};
  const Eigen::Index rows = lengths[0] + lengths[1];
  p.tensors["tok"] = random_matrix(rng, rows, cfg.token_size());
  const MatrixXd w = random_matrix(rng, rows, cfg.attention_dim);
  auto loss = [&](Tape & t, const ParamBundle & params) {
      model::AtpgVars v;
      v.token = numerics::bind_linear(t, params, "atpg.token");
      v.tem_q = t.param(params, "atpg.tem_q");
      v.tem_k = t.param(params, "atpg.tem_k");
      v.tem_v = t.param(params, "atpg.tem_v");
      v.scale = 1.0 / std::sqrt(static_cast<double>(cfg.attention_dim));
      return probe(t, model::temporal_encode(v, t.param(params, "tok"), lengths), w);
    };
  return numerics::check_gradients(loss, p);
}

GradCheckReport fd_agent_attention(std::mt19937_64 & rng, std::uint64_t seed)
{
  model::ModelConfig cfg = small_model(rng);
  cfg.num_agents = 3;
  cfg.atpg = true;
  ParamBundle p = with_prefix(model::init_model(cfg, seed), "atpg.agent");
  std::vector<MatrixXd> w;
  for (int i = 0; i < 3; ++i) {
    p.tensors["e" + std::to_string(i)] = random_matrix(rng, 2, cfg.attention_dim, 2.0);
    w.push_back(random_matrix(rng, 2, cfg.attention_dim));
  }
  const double delta = cfg.delta;
  auto loss = [&](Tape & t, const ParamBundle & params) {
      model::AtpgVars v;
      v.agent_q = t.param(params, "atpg.agent_q");
      v.agent_k = t.param(params, "atpg.agent_k");
      v.agent_v = t.param(params, "atpg.agent_v");
      v.scale = 1.0 / std::sqrt(static_cast<double>(cfg.attention_dim));
      std::vector<Var> e;
      for (int i = 0; i < 3; ++i) {e.push_back(t.param(params, "e" + std::to_string(i)));}
      const model::AgentEncoding out = model::agent_encode(v, e, delta);
      Var total = probe(t, out.e_hat[0], w[0]);
      for (int i = 1; i < 3; ++i) {total = total + probe(t, out.e_hat[i], w[i]);}
      return total;
    };
  return numerics::check_gradients(loss, p);
}

// Temporal and agent attention, parameter generation and the mixer in one expression.
GradCheckReport fd_mixing_stack(std::mt19937_64 & rng, std::uint64_t seed)
{
  model::ModelConfig cfg = small_model(rng);
  cfg.time_dim = 2;
  ParamBundle p = model::init_model(cfg, seed);
  for (auto it = p.tensors.begin(); it != p.tensors.end();) {
    it = it->first.rfind("agent", 0) == 0 ? p.tensors.erase(it) : std::next(it);
  }
  const int n = cfg.num_agents;
  for (int i = 0; i < n; ++i) {p.tensors["tok" + std::to_string(i)] = random_matrix(rng, 3, cfg.token_size());}
  p.tensors["state"] = random_matrix(rng, 1, cfg.state_size);
  p.tensors["q"] = random_matrix(rng, 1, n, 2.0);
  const bool atpg = cfg.atpg;
  const double delta = cfg.delta;
  auto loss = [&](Tape & t, const ParamBundle & params) {
      const model::AtpgVars v = model::bind_atpg(t, params, cfg);
      model::MixerParams m;
      if (atpg) {
        std::vector<Var> e;
        for (int i = 0; i < n; ++i) {
          e.push_back(numerics::slice_rows(
              model::temporal_encode(v, t.param(params, "tok" + std::to_string(i)), {3}), 2, 1));
        }
        m = model::generate_mixer_params(v, model::agent_encode(v, e, delta).e_hat, t.param(params, "state"));
      } else {
        m = model::generate_state_mixer_params(v, t.param(params, "state"));
      }
      return numerics::sum(model::mix(t.param(params, "q"), m));
    };
  return numerics::check_gradients(loss, p);
}

// Micro- and macro-TD loss through the whole network on a recorded tiny-async rollout.
GradCheckReport fd_td_loss(std::mt19937_64 & rng, std::uint64_t seed)
{
  auto env = env::make_env({"tiny-async", 0, 12});
  model::ModelConfig cfg = small_model(rng);
  cfg.num_agents = env->num_agents();
  cfg.num_actions = env->num_macro_actions();
  cfg.obs_size = env->observation_size();
  cfg.state_size = env->state_size();
  const double gamma = 0.9;
  replay::MacSjertBuffer buffer({cfg.num_agents, gamma, 1000}, cfg.state_size, cfg.obs_size, cfg.hidden);
  const ParamBundle params = model::init_model(cfg, seed);
  std::mt19937_64 explore(seed);
  const train::EpisodeResult ep = train::run_episode(*env, params, cfg, 1.0, explore, seed, &buffer);
  const int steps = ep.episode->num_steps();
  std::uniform_int_distribution<int> pick(0, steps - 1), ctx(0, 3), nstep(1, 3);

  std::vector<train::TdItem> items = train::micro_items(
    {{ep.episode, pick(rng)}, {ep.episode, pick(rng)}, {ep.episode, steps - 1}}, gamma, nstep(rng));
  const auto macro = train::macro_items({{buffer.agent(0).segments().front()}}, gamma);
  items.insert(items.end(), macro.begin(), macro.end());
  const model::ForwardOptions options{ctx(rng)};
  const std::vector<double> y = train::td_targets(model::init_model(cfg, seed + 1), cfg, items, options);
  auto loss = [&](Tape & t, const ParamBundle & p) {return train::td_loss(t, p, cfg, items, y, options);};
  GradCheckOptions opt;
  opt.max_coordinates = 40;
  opt.seed = seed;
  return numerics::check_gradients(loss, params, opt);
}

Verdict criterion_gradients()
{
  Stopwatch clock;
  struct Block { const char * name; std::function<GradCheckReport(std::mt19937_64 &, std::uint64_t)> run; };
  const std::vector<Block> blocks{
    {"agent-net", fd_agent_net}, {"temporal", fd_temporal}, {"agent-attention", fd_agent_attention},
    {"mixing-stack", fd_mixing_stack}, {"td-loss", fd_td_loss}};
  constexpr int kDrawsPerBlock = 24;
  std::mt19937_64 rng(1);
  int draws = 0;
  long coordinates = 0;
  double worst = 0.0;
  std::string worst_where;
  int failures = 0;
  for (const Block & b : blocks) {
    for (int d = 0; d < kDrawsPerBlock; ++d) {
      const GradCheckReport r = b.run(rng, static_cast<std::uint64_t>(1000 * draws + 7));
      ++draws;
      coordinates += static_cast<long>(r.checked);
      if (r.checked == 0 || !r.passed(1e-4)) {++failures;}
      if (r.max_error >= worst) {
        worst = r.max_error;
        worst_where = std::string(b.name) + ":" + r.worst_path;
      }
    }
  }
  const double secs = clock.seconds();
  std::ostringstream ss;
  ss << draws << " draws over " << blocks.size() << " blocks, " << coordinates << " coordinates, max rel err "
     << std::scientific << std::setprecision(2) << worst << " (" << worst_where << "), " << fmt(secs, 1) << " s";
  return {failures == 0 && draws >= 100 && secs < 60.0, ss.str()};
}

// ----------------------------------------------------------------------------
// 2-4. Consistency lab

const igm::LabReport & lab_report(double & seconds)
{
  static std::optional<igm::LabReport> report;
  static double elapsed = 0.0;
  if (!report) {
    Stopwatch clock;
    report = igm::run_lab(igm::LabOptions{});
    elapsed = clock.seconds();
  }
  seconds = elapsed;
  return *report;
}

Verdict criterion_sufficiency()
{
  double secs = 0.0;
  const igm::LabReport & r = lab_report(secs);
  const auto & o = r.options;
  std::ostringstream ss;
  ss << r.sufficiency_instances << " instances (n<=" << o.max_agents << ", |M|<=" << o.max_actions
     << ", d<=" << o.max_duration << "), " << r.sufficiency_situations << " situations, "
     << r.sufficiency_failures.size() + static_cast<std::size_t>(r.additive_failures) << " failures, lab "
     << fmt(secs, 1) << " s";
  const bool covers = o.max_agents >= 3 && o.max_actions >= 4 && o.max_duration >= 3;
  return {r.sufficiency_pass() && covers && r.sufficiency_instances >= 1000 && secs < 300.0, ss.str()};
}

Verdict criterion_reduction()
{
  Stopwatch clock;
  const std::vector<igm::TabularInstance> grid = igm::duration_one_grid();
  long disagreements = 0;
  long tomac_pass = 0;
  for (const igm::TabularInstance & inst : grid) {
    const igm::ReductionResult r = igm::check_reduction_to_igm(inst);
    disagreements += r.agree() ? 0 : 1;
    tomac_pass += r.tomacigm ? 1 : 0;
  }
  const igm::StrictnessWitness w = igm::strictness_witness();
  const double secs = clock.seconds();
  std::ostringstream ss;
  ss << grid.size() << " instances, " << disagreements << " disagreements, " << tomac_pass
     << " consistent; witness agent " << w.agent << " action " << w.action << " Q " << w.q_start << " -> "
     << w.q_later << (w.consistent ? " (consistent)" : " (NOT consistent)") << ", " << fmt(secs, 2) << " s";
  const bool strict = w.consistent && w.q_start != w.q_later;
  return {grid.size() == 6561 && disagreements == 0 && strict && secs < 60.0, ss.str()};
}

Verdict criterion_advantage()
{
  double secs = 0.0;
  const igm::LabReport & r = lab_report(secs);
  std::ostringstream ss;
  ss << r.adv_draws << " offset draws, " << r.adv_comparisons << " argmax-set comparisons, " << r.adv_changes
     << " changes";
  return {r.adv_draws >= 1000 && r.adv_changes == 0, ss.str()};
}

// ----------------------------------------------------------------------------
// 5. Mac-SJERT against an independent rescan of the raw trace

struct OracleSegment
{
  int action;
  int start;
  int end;
  double reward;
};

std::vector<std::vector<OracleSegment>> rescan(const env::Trace & trace, int agents, double gamma)
{
  std::vector<std::vector<OracleSegment>> out(static_cast<std::size_t>(agents));
  const int steps = static_cast<int>(trace.lines.size());
  for (int i = 0; i < agents; ++i) {
    int start = 0;
    double reward = 0.0;
    double discount = 1.0;
    for (int t = 0; t < steps; ++t) {
      const env::TraceLine & l = trace.lines[static_cast<std::size_t>(t)];
      reward += discount * l.reward;
      discount *= gamma;
      if (l.terminated[static_cast<std::size_t>(i)] != 0 || t == steps - 1) {
        out[static_cast<std::size_t>(i)].push_back(
          {trace.lines[static_cast<std::size_t>(start)].macro_actions[static_cast<std::size_t>(i)], start, t, reward});
        start = t + 1;
        reward = 0.0;
        discount = 1.0;
      }
    }
  }
  return out;
}

bool same(const Eigen::Ref<const VectorXd> & a, const Eigen::Ref<const VectorXd> & b)
{
  return a.size() == b.size() && (a.array() == b.array()).all();
}

std::uint32_t mask_of(const std::vector<int> & ids)
{
  std::uint32_t m = 0;
  for (int a : ids) {m |= 1u << a;}
  return m;
}

struct FieldAudit
{
  long checks = 0;
  long mismatches = 0;
  std::string first;

  void expect(bool ok, const std::string & what)
  {
    ++checks;
    if (!ok && mismatches++ == 0) {first = what;}
  }
};

// Re-simulates the environment from the trace's seed and recorded joint macro-actions.
void audit_frames(const replay::EpisodeTrace & ep, const env::Trace & trace, const env::EnvConfig & env_config,
  FieldAudit & audit)
{
  auto env = env::make_env(env_config);
  env->reset(trace.seed);
  const int n = ep.num_agents();
  const int steps = static_cast<int>(trace.lines.size());
  audit.expect(ep.num_steps() == steps && ep.closed(), "step count");
  std::vector<int> selected_at(static_cast<std::size_t>(n), 0);
  for (int f = 0; f <= steps; ++f) {
    const std::string where = "frame " + std::to_string(f);
    audit.expect(ep.time(f) == env->time(), where + " time");
    audit.expect(same(ep.state(f), env->state_features()), where + " state");
    for (int i = 0; i < n; ++i) {
      if (f > 0 && trace.lines[static_cast<std::size_t>(f - 1)].terminated[static_cast<std::size_t>(i)] != 0) {
        selected_at[static_cast<std::size_t>(i)] = f;
      }
      audit.expect(same(ep.observation(f, i), env->macro_observation(i)), where + " observation");
      audit.expect(same(ep.stale_observation(f, i), ep.observation(selected_at[static_cast<std::size_t>(i)], i)),
        where + " stale observation");
      audit.expect(ep.available(f, i) == mask_of(env->available_macro_actions(i)), where + " available");
      const int prev = f == 0 ? -1 : trace.lines[static_cast<std::size_t>(f - 1)].macro_actions[static_cast<std::size_t>(i)];
      audit.expect(ep.prev_action(f, i) == prev, where + " previous action");
    }
    if (f == steps) {break;}
    const env::TraceLine & l = trace.lines[static_cast<std::size_t>(f)];
    std::vector<env::ActiveMacro> active;
    for (int i = 0; i < n; ++i) {
      audit.expect(ep.action(f, i) == l.macro_actions[static_cast<std::size_t>(i)], where + " action");
      audit.expect(ep.progress(f, i) == l.internal_steps[static_cast<std::size_t>(i)], where + " progress");
      audit.expect(ep.terminated(f, i) == l.terminated[static_cast<std::size_t>(i)], where + " terminated");
      active.push_back({l.macro_actions[static_cast<std::size_t>(i)], l.internal_steps[static_cast<std::size_t>(i)]});
    }
    audit.expect(ep.reward(f) == l.reward, where + " reward");
    const env::StepOutcome out = env->advance(active);
    audit.expect(out.reward == l.reward, where + " re-simulated reward");
    audit.expect(out.terminated == l.terminated, where + " re-simulated termination");
    audit.expect(ep.done(f) == out.done && out.done == (f == steps - 1), where + " done");
  }
}

void audit_item(const train::TdItem & item, const replay::EpisodeTrace & ep, const env::Trace & trace, int online,
  int last, double reward, double discount, FieldAudit & audit)
{
  const auto & lines = trace.lines;
  const std::string where = "item at " + std::to_string(online);
  audit.expect(item.online.episode == &ep && item.online.frame == online, where + " online frame");
  audit.expect(item.actions == lines[static_cast<std::size_t>(online)].macro_actions, where + " actions");
  audit.expect(item.reward == reward, where + " reward");
  audit.expect(item.discount == discount, where + " discount");
  audit.expect(item.next.frame == last + 1, where + " next frame");
  const bool bootstrap = last + 1 < static_cast<int>(lines.size());
  audit.expect(item.bootstrap == bootstrap, where + " bootstrap");
  if (bootstrap) {
    audit.expect(item.pinned == lines[static_cast<std::size_t>(last)].macro_actions, where + " pinned");
    audit.expect(item.terminated == lines[static_cast<std::size_t>(last)].terminated, where + " terminated");
    bool available = item.available.size() == static_cast<std::size_t>(ep.num_agents());
    for (int i = 0; available && i < ep.num_agents(); ++i) {
      available = item.available[static_cast<std::size_t>(i)] == ep.available(last + 1, i);
    }
    audit.expect(available, where + " available");
  }
}

Verdict criterion_buffer()
{
  constexpr int kEpisodes = 1000;
  constexpr double kGamma = 0.95;
  const env::EnvConfig env_config{"boxpushing", 6, 100};
  auto env = env::make_env(env_config);
  train::TrainConfig tc;
  tc.rnn_hidden = 8;
  tc.attention_dim = 8;
  tc.mixer_hidden = 8;
  const model::ModelConfig cfg = train::model_config(tc, *env);
  const ParamBundle params = model::init_model(cfg, 0);
  replay::MacSjertBuffer buffer({cfg.num_agents, kGamma, 1u << 22}, cfg.state_size, cfg.obs_size, cfg.hidden);

  std::mt19937_64 explore(5), seeds(6);
  std::uniform_real_distribution<double> eps(0.0, 1.0);
  std::vector<env::Trace> traces;
  std::vector<replay::EpisodePtr> episodes;
  for (int e = 0; e < kEpisodes; ++e) {
    // A mix of random and greedy selection so segments of every length appear.
    const train::EpisodeResult r = train::run_episode(*env, params, cfg, eps(explore), explore, seeds(), &buffer);
    traces.push_back(r.trace);
    episodes.push_back(r.episode);
  }

  FieldAudit audit;
  long segments = 0;
  double worst = 0.0;
  std::size_t pairs_expected = 0;
  std::map<const replay::EpisodeTrace *, int> index;
  for (int e = 0; e < kEpisodes; ++e) {index[episodes[static_cast<std::size_t>(e)].get()] = e;}

  for (int i = 0; i < cfg.num_agents; ++i) {
    const auto & stored = buffer.agent(i).segments();
    std::vector<std::pair<int, OracleSegment>> expected;
    for (int e = 0; e < kEpisodes; ++e) {
      const auto oracle = rescan(traces[static_cast<std::size_t>(e)], cfg.num_agents, kGamma);
      for (const OracleSegment & s : oracle[static_cast<std::size_t>(i)]) {
        expected.emplace_back(e, s);
        pairs_expected += static_cast<std::size_t>(s.end - s.start + 1);
      }
    }
    audit.expect(stored.size() == expected.size(), "segment count for agent " + std::to_string(i));
    for (std::size_t k = 0; k < std::min(stored.size(), expected.size()); ++k) {
      const replay::MacroSegment & got = stored[k];
      const auto & [e, want] = expected[k];
      ++segments;
      worst = std::max(worst, std::abs(got.reward - want.reward));
      audit.expect(std::abs(got.reward - want.reward) <= 1e-9, "R_m");
      audit.expect(got.owner == i && index.at(got.episode.get()) == e && got.start == want.start &&
        got.end == want.end && got.macro_action == want.action, "segment bounds");
      if (k > 0) {audit.expect(replay::precedes(stored[k - 1], got), "termination order");}
    }
  }
  std::size_t pairs_stored = 0;
  for (int i = 0; i < cfg.num_agents; ++i) {pairs_stored += buffer.agent(i).step_pairs();}
  audit.expect(pairs_stored == pairs_expected, "step pair count");

  // Every stored field against a re-simulation, then every micro and macro transition.
  for (int e = 0; e < kEpisodes; ++e) {
    const replay::EpisodeTrace & ep = *episodes[static_cast<std::size_t>(e)];
    const env::Trace & trace = traces[static_cast<std::size_t>(e)];
    audit_frames(ep, trace, env_config, audit);
    for (int t = 0; t < ep.num_steps(); ++t) {
      const train::TdItem item = train::micro_items({{episodes[static_cast<std::size_t>(e)], t}}, kGamma, 1).front();
      audit_item(item, ep, trace, t, t, trace.lines[static_cast<std::size_t>(t)].reward, kGamma, audit);
    }
  }
  for (int i = 0; i < cfg.num_agents; ++i) {
    for (const replay::MacroSegment & s : buffer.agent(i).segments()) {
      const int e = index.at(s.episode.get());
      const OracleSegment want{s.macro_action, s.start, s.end,
        [&] {
          double r = 0.0;
          for (int t = s.end; t >= s.start; --t) {r = traces[static_cast<std::size_t>(e)].lines[static_cast<std::size_t>(t)].reward + kGamma * r;}
          return r;
        }()};
      const train::TdItem item = train::macro_items({{s}}, kGamma).front();
      // The segment reward is compared to 1e-9 above; here it must be the stored value.
      audit_item(item, *s.episode, traces[static_cast<std::size_t>(e)], s.start, s.end, s.reward,
        std::pow(kGamma, s.duration()), audit);
      audit.expect(std::abs(item.reward - want.reward) <= 1e-9, "macro item reward vs backward rescan");
    }
  }

  std::ostringstream ss;
  ss << kEpisodes << " rollouts, " << segments << " segments, max |R_m - oracle| " << std::scientific
     << std::setprecision(1) << worst << ", " << audit.checks << " field checks, " << audit.mismatches << " mismatches";
  if (audit.mismatches > 0) {ss << " (first: " << audit.first << ")";}
  return {audit.mismatches == 0 && worst <= 1e-9, ss.str()};
}

// ----------------------------------------------------------------------------
// 6. The asynchronous timeline of the motivating example

// Two agents on a fixed schedule. Agent 0 runs macro 0 (3 steps) then macro 3 (2 steps);
// agent 1 runs macro 1 (2 steps) then macro 2 (3 steps). Reward at step t is 2^t, so any
// credited sum identifies exactly which steps it covers.
class ScriptedTimeline : public env::MacroEnv
{
public:
  std::string name() const override {return "scripted-timeline";}
  int num_agents() const override {return 2;}
  int num_macro_actions() const override {return 4;}
  int observation_size() const override {return 2;}
  int state_size() const override {return 1;}
  int horizon() const override {return 5;}
  int time() const override {return t_;}
  bool done() const override {return t_ >= horizon();}

  void reset(std::uint64_t) override
  {
    t_ = 0;
    next_ = {0, 0};
  }

  std::vector<int> available_macro_actions(int agent) const override
  {
    const auto & s = kSchedule[static_cast<std::size_t>(agent)];
    return {s[std::min<std::size_t>(next_[static_cast<std::size_t>(agent)], s.size() - 1)]};
  }

  std::string macro_action_name(int id) const override {return "m" + std::to_string(id);}

  env::StepOutcome advance(const std::vector<env::ActiveMacro> & active) override
  {
    env::StepOutcome out;
    out.reward = std::ldexp(1.0, t_);
    for (std::size_t i = 0; i < active.size(); ++i) {
      const bool ends = active[i].internal_step + 1 == kDuration[static_cast<std::size_t>(active[i].id)];
      out.terminated.push_back(ends ? 1 : 0);
      if (ends) {++next_[i];}
    }
    ++t_;
    out.done = done();
    return out;
  }

  VectorXd macro_observation(int agent) const override
  {
    return (VectorXd(2) << t_, agent).finished();
  }

  VectorXd state_features() const override {return VectorXd::Constant(1, t_);}
  std::string render() const override {return "t=" + std::to_string(t_);}
  std::unique_ptr<MacroEnv> clone() const override {return std::make_unique<ScriptedTimeline>(*this);}

private:
  static constexpr std::array<int, 4> kDuration{3, 2, 3, 2};
  inline static const std::array<std::vector<int>, 2> kSchedule{std::vector<int>{0, 3}, std::vector<int>{1, 2}};
  int t_ = 0;
  std::array<std::size_t, 2> next_{};
};

Verdict criterion_timeline()
{
  ScriptedTimeline env;
  model::ModelConfig cfg;
  cfg.num_agents = 2;
  cfg.num_actions = 4;
  cfg.obs_size = 2;
  cfg.state_size = 1;
  cfg.hidden = 4;
  cfg.attention_dim = 4;
  cfg.mixer_hidden = 4;
  replay::MacSjertBuffer buffer({2, 1.0, 100}, 1, 2, cfg.hidden);
  std::mt19937_64 explore(0);
  const train::EpisodeResult r = train::run_episode(env, model::init_model(cfg, 0), cfg, 0.5, explore, 0, &buffer);
  const replay::EpisodeTrace & ep = *r.episode;

  std::vector<std::string> problems;
  auto expect = [&](bool ok, const std::string & what) {if (!ok) {problems.push_back(what);}};

  // Agent 0's first macro-action covers steps 0..2; the first three rewards are 1, 2, 4.
  const auto & seg = buffer.agent(0).segments();
  expect(seg.size() == 2 && seg[0].start == 0 && seg[0].end == 2 && seg[0].macro_action == 0, "agent 1 segment");
  const double sjert = seg.empty() ? -1.0 : seg[0].reward;
  const double r123 = ep.reward(0) + ep.reward(1) + ep.reward(2);
  expect(sjert == r123 && sjert == 7.0, "Mac-SJERT credit");

  // A termination-driven buffer restarts accumulation when agent 2 finishes at step 1.
  const double jert = replay::MacJertBuffer::credited_reward(ep, 2, 1.0);
  expect(jert == ep.reward(2) && jert == 4.0, "Mac-JERT credit");
  expect(replay::decision_points(ep) == std::vector<int>({0, 2, 3}), "decision points");
  const replay::MacJertBuffer jb = replay::as_macjert({r.episode}, 1.0, 100);
  std::vector<std::pair<int, int>> spans;
  for (const auto & tr : jb.transitions()) {spans.emplace_back(tr.start, tr.end);}
  expect(spans == std::vector<std::pair<int, int>>({{0, 1}, {2, 2}, {3, 4}}), "joint transitions");

  // Agent 2's second macro-action starts at step 2 and is still running at steps 3 and 4.
  for (int f : {3, 4}) {
    expect(ep.progress(f, 1) == f - 2 && ep.action(f, 1) == 2, "agent 2 still executing at step " + std::to_string(f));
    expect(same(ep.stale_observation(f, 1), ep.observation(2, 1)), "stale observation at step " + std::to_string(f));
    expect(!same(ep.stale_observation(f, 1), ep.observation(f, 1)), "fresh observation at step " + std::to_string(f));
  }

  std::ostringstream ss;
  ss << "SJERT credit " << sjert << " (r1+r2+r3 = " << r123 << "), JERT credit " << jert << " (r3 = "
     << ep.reward(2) << "), stale obs for agent 2 at t=4,5";
  if (!problems.empty()) {ss << "; failed: " << problems.front();}
  return {problems.empty(), ss.str()};
}

// ----------------------------------------------------------------------------
// 7-8. Training on the 6x6 map

constexpr int kTrainEpisodes = 10000;
constexpr int kFinalEvalEpisodes = 100;
constexpr std::uint64_t kEvalSeed = 424242;

train::TrainConfig profile(const std::string & name)
{
  std::ifstream in(fs::path(TOMAC_SOURCE_DIR) / "configs" / (name + ".json"));
  return train::config_from_json(train::json::parse(in));
}

struct RunResult
{
  double final_mean = 0.0;
  double final_std = 0.0;
  double seconds = 0.0;
};

RunResult train_and_evaluate(train::TrainConfig config)
{
  Stopwatch clock;
  config.episodes = kTrainEpisodes;
  const train::TrainResult result = train::train(config);
  const train::EvalStats s =
    train::evaluate(result.params, result.model, config.env, kFinalEvalEpisodes, kEvalSeed);
  return {s.mean, s.std, clock.seconds()};
}

std::map<std::string, std::map<std::uint64_t, RunResult>> & run_cache()
{
  static std::map<std::string, std::map<std::uint64_t, RunResult>> cache;
  return cache;
}

const RunResult & run(const std::string & variant, std::uint64_t seed)
{
  auto & slot = run_cache()[variant];
  if (!slot.count(seed)) {
    train::TrainConfig c = profile("boxpushing6");
    c.seed = seed;
    c.variant = variant;
    if (variant == "mac-jert") {c.buffer = train::BufferKind::MacJert;}
    slot[seed] = train_and_evaluate(c);
    std::cerr << "  [" << variant << " seed " << seed << "] greedy mean " << fmt(slot[seed].final_mean, 2)
              << " +/- " << fmt(slot[seed].final_std, 2) << " (" << fmt(slot[seed].seconds, 0) << " s)\n";
  }
  return slot[seed];
}

Verdict criterion_training()
{
  const RunResult & full = run("full", 0);
  train::TrainConfig c = profile("boxpushing6");
  auto env = env::make_env(c.env);
  const model::ModelConfig cfg = train::model_config(c, *env);
  const train::EvalStats random =
    train::evaluate(model::init_model(cfg, 0), cfg, c.env, kFinalEvalEpisodes, kEvalSeed, 1.0);
  std::ostringstream ss;
  ss << kTrainEpisodes << " episodes, greedy mean " << fmt(full.final_mean, 2) << " +/- " << fmt(full.final_std, 2)
     << " over " << kFinalEvalEpisodes << " episodes; random-macro baseline " << fmt(random.mean, 2) << "; "
     << fmt(full.seconds, 0) << " s";
  return {full.final_mean >= 10.0 && full.final_mean > random.mean, ss.str()};
}

double median(std::vector<double> v)
{
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

Verdict criterion_ablation()
{
  std::vector<double> full, jert;
  std::ostringstream per_seed;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    full.push_back(run("full", seed).final_mean);
    jert.push_back(run("mac-jert", seed).final_mean);
    per_seed << (seed == 0 ? "" : ", ") << fmt(full.back(), 1) << "/" << fmt(jert.back(), 1);
  }
  const double mf = median(full);
  const double mj = median(jert);
  std::ostringstream ss;
  ss << "median over 5 seeds: full " << fmt(mf, 2) << ", mac-jert " << fmt(mj, 2) << " (per seed full/jert: "
     << per_seed.str() << ")";
  if (mf < mj) {ss << "  ORDERING FAILED";}
  return {mf >= mj, ss.str()};
}

// ----------------------------------------------------------------------------
// 9. Determinism of the command-line tool

struct Shell
{
  int code = -1;
  std::string output;
};

Shell shell(const std::string & command)
{
  Shell r;
  FILE * pipe = popen((command + " 2>&1").c_str(), "r");
  if (pipe == nullptr) {return r;}
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) {r.output.append(buf.data(), n);}
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path & p)
{
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> tree(const fs::path & root)
{
  std::map<std::string, std::string> files;
  for (const auto & f : fs::recursive_directory_iterator(root)) {
    if (f.is_regular_file()) {files[fs::relative(f.path(), root).string()] = slurp(f.path());}
  }
  return files;
}

Verdict criterion_determinism()
{
  const fs::path root = fs::temp_directory_path() / ("tomac-acceptance-" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string bin = std::string("'") + TOMAC_BINARY + "'";
  const std::string config = (fs::path(TOMAC_SOURCE_DIR) / "configs" / "boxpushing6.json").string();

  std::vector<std::string> problems;
  int compared = 0;
  for (const char * label : {"a", "b"}) {
    const fs::path dir = root / label;
    const Shell t = shell(bin + " train --config '" + config + "' --episodes 300 --eval-every 100 --eval-episodes 10"
        " --seed 3 --log-every 0 --out '" + (dir / "train").string() + "'");
    const Shell e = shell(bin + " eval --checkpoint '" + (dir / "train" / "checkpoint").string() +
        "' --episodes 20 --seed 9 --out '" + (dir / "eval.json").string() + "' --trace '" + (dir / "eval.trace").string() + "'");
    const Shell v = shell(bin + " verify-igm --seed 2 --out '" + (dir / "igm.json").string() + "'");
    if (t.code != 0 || e.code != 0 || v.code != 0) {
      problems.push_back(std::string("run ") + label + " exit codes " + std::to_string(t.code) + "/" +
        std::to_string(e.code) + "/" + std::to_string(v.code));
    }
    // The resolved config records absolute output paths, which differ by design.
    fs::remove(dir / "train" / "resolved-config.json");
  }
  if (problems.empty()) {
    const auto a = tree(root / "a");
    const auto b = tree(root / "b");
    if (a.size() != b.size()) {problems.push_back("different file sets");}
    for (const auto & [name, bytes] : a) {
      ++compared;
      const auto it = b.find(name);
      if (it == b.end() || it->second != bytes) {problems.push_back(name + " differs");}
    }
  }
  fs::remove_all(root);
  std::ostringstream ss;
  ss << compared << " files compared across two train/eval/verify-igm runs";
  if (!problems.empty()) {ss << "; " << problems.front();}
  return {problems.empty() && compared > 0, ss.str()};
}

}  // namespace

int main(int argc, char ** argv)
{
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
    {"gradient integrity", criterion_gradients},
    {"To-Mac-IGM sufficiency", criterion_sufficiency},
    {"reduction to IGM", criterion_reduction},
    {"argmax invariance under offsets", criterion_advantage},
    {"Mac-SJERT oracle equivalence", criterion_buffer},
    {"asynchronous timeline regression", criterion_timeline},
    {"training sanity (6x6, 10K episodes)", criterion_training},
    {"ablation direction (full >= mac-jert)", criterion_ablation},
    {"determinism", criterion_determinism},
  };

  std::set<int> selected;
  for (int k = 1; k < argc; ++k) {selected.insert(std::stoi(argv[k]));}
  // ctest hides the output of passing tests, so the verdicts are also kept on disk.
  std::ofstream report("acceptance_report.txt");
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!selected.empty() && !selected.count(id)) {continue;}
    Verdict v;
    try {
      v = criteria[k].second();
    } catch (const std::exception & e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failures += v.pass ? 0 : 1;
    std::ostringstream line;
    line << (v.pass ? "PASS" : "FAIL") << "  [" << id << "] " << criteria[k].first << ": " << v.detail;
    std::cout << line.str() << std::endl;
    report << line.str() << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
