#pragma once

#include "tomac/env/macro_env.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace tomac::env
{

/// One primitive timestep of a rollout.
struct TraceLine
{
  int t = 0;
  std::vector<int> macro_actions;
  std::vector<int> internal_steps;
  double reward = 0.0;
  std::vector<int> terminated;
};

struct Trace
{
  EnvConfig env;
  std::uint64_t seed = 0;
  std::vector<TraceLine> lines;
};

class TraceFormatError : public std::runtime_error
{
public:
  TraceFormatError(int line, const std::string & what)
  : std::runtime_error("trace line " + std::to_string(line) + ": " + what), line_(line) {}

  int line() const {return line_;}

private:
  int line_;
};

/// Tab-separated: t, macro ids, internal steps, reward, termination flags; per-agent
/// fields are comma-joined. A leading "# env=... grid=... horizon=... seed=..." comment
/// names the environment.
void write_trace(std::ostream & out, const Trace & trace);
Trace read_trace(std::istream & in);

/// Re-simulates the trace and returns one rendered frame per line (post-step world).
/// Throws TraceFormatError when the recorded reward disagrees with the simulation.
std::vector<std::string> replay_frames(const Trace & trace);

}  // namespace tomac::env
