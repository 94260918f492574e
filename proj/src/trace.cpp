#include "tomac/env/trace.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace tomac::env
{

namespace
{

std::string join(const std::vector<int> & v)
{
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) {out += ',';}
    out += std::to_string(v[i]);
  }
  return out;
}

std::vector<int> split_ints(const std::string & field, int line)
{
  std::vector<int> out;
  std::istringstream in(field);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) {
        throw std::invalid_argument(item);
      }
    } catch (const std::exception &) {
      throw TraceFormatError(line, "expected integer, got '" + item + "'");
    }
  }
  return out;
}

}  // namespace

void write_trace(std::ostream & out, const Trace & trace)
{
  out << "# env=" << trace.env.name << " grid=" << trace.env.grid_size << " horizon=" <<
    trace.env.horizon << " seed=" << trace.seed << "\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const TraceLine & l : trace.lines) {
    out << l.t << '\t' << join(l.macro_actions) << '\t' << join(l.internal_steps) << '\t' <<
      l.reward << '\t' << join(l.terminated) << '\n';
  }
}

Trace read_trace(std::istream & in)
{
  Trace trace;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    if (line[0] == '#') {
      std::istringstream header(line.substr(1));
      std::string kv;
      while (header >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
          throw TraceFormatError(line_no, "bad header entry '" + kv + "'");
        }
        const std::string key = kv.substr(0, eq);
        const std::string value = kv.substr(eq + 1);
        try {
          if (key == "env") {trace.env.name = value;}
          else if (key == "grid") {trace.env.grid_size = std::stoi(value);}
          else if (key == "horizon") {trace.env.horizon = std::stoi(value);}
          else if (key == "seed") {trace.seed = std::stoull(value);}
          else {throw TraceFormatError(line_no, "unknown header key '" + key + "'");}
        } catch (const TraceFormatError &) {
          throw;
        } catch (const std::exception &) {
          throw TraceFormatError(line_no, "bad header value '" + kv + "'");
        }
      }
      continue;
    }
    std::vector<std::string> fields;
    std::istringstream row(line);
    std::string field;
    while (std::getline(row, field, '\t')) {
      fields.push_back(field);
    }
    if (fields.size() != 5) {
      throw TraceFormatError(line_no, "expected 5 tab-separated fields, got " + std::to_string(fields.size()));
    }
    TraceLine l;
    try {
      std::size_t used = 0;
      l.t = std::stoi(fields[0], &used);
      if (used != fields[0].size()) {throw std::invalid_argument(fields[0]);}
      l.reward = std::stod(fields[3], &used);
      if (used != fields[3].size()) {throw std::invalid_argument(fields[3]);}
    } catch (const std::exception &) {
      throw TraceFormatError(line_no, "bad timestep or reward field");
    }
    l.macro_actions = split_ints(fields[1], line_no);
    l.internal_steps = split_ints(fields[2], line_no);
    l.terminated = split_ints(fields[4], line_no);
    if (l.macro_actions.size() != l.internal_steps.size() ||
      l.macro_actions.size() != l.terminated.size())
    {
      throw TraceFormatError(line_no, "per-agent field lengths differ");
    }
    trace.lines.push_back(std::move(l));
  }
  return trace;
}

std::vector<std::string> replay_frames(const Trace & trace)
{
  std::vector<std::string> frames;
  if (trace.lines.empty()) {
    return frames;
  }
  auto env = make_env(trace.env);
  env->reset(trace.seed);
  for (std::size_t i = 0; i < trace.lines.size(); ++i) {
    const TraceLine & l = trace.lines[i];
    const int line_no = static_cast<int>(i) + 2;
    if (static_cast<int>(l.macro_actions.size()) != env->num_agents()) {
      throw TraceFormatError(line_no, "wrong agent count");
    }
    if (env->done()) {
      throw TraceFormatError(line_no, "trace continues after the episode ended");
    }
    std::vector<ActiveMacro> active;
    for (std::size_t a = 0; a < l.macro_actions.size(); ++a) {
      active.push_back({l.macro_actions[a], l.internal_steps[a]});
    }
    StepOutcome out;
    try {
      out = env->advance(active);
    } catch (const std::exception & e) {
      throw TraceFormatError(line_no, e.what());
    }
    if (std::abs(out.reward - l.reward) > 1e-9) {
      throw TraceFormatError(line_no, "recorded reward does not match simulation");
    }
    std::ostringstream frame;
    frame << "t=" << l.t << " reward=" << l.reward << "\n" << env->render();
    frames.push_back(frame.str());
  }
  return frames;
}

}  // namespace tomac::env
