#include "tomac/env/boxpushing.hpp"

#include <algorithm>
#include <deque>
#include <sstream>
#include <stdexcept>

namespace tomac::env
{

namespace
{

bool in_grid(const BoxPushingState & s, Cell c)
{
  return c.row >= 0 && c.col >= 0 && c.row < s.size && c.col < s.size;
}

bool on_big_box(const BoxPushingState & s, Cell c)
{
  return c.row == s.big_box.row && (c.col == s.big_box.col || c.col == s.big_box.col + 1);
}

int small_box_at(const BoxPushingState & s, Cell c)
{
  for (std::size_t i = 0; i < s.small_boxes.size(); ++i) {
    if (s.small_boxes[i] == c) {
      return static_cast<int>(i);
    }
  }
  return -1;
}

bool has_box(const BoxPushingState & s, Cell c)
{
  return on_big_box(s, c) || small_box_at(s, c) >= 0;
}

Heading heading_towards(Cell from, Cell to)
{
  if (to.row < from.row) {return Heading::Up;}
  if (to.row > from.row) {return Heading::Down;}
  if (to.col > from.col) {return Heading::Right;}
  return Heading::Left;
}

Primitive rotate_towards(Heading current, Heading desired)
{
  const int diff = (static_cast<int>(desired) - static_cast<int>(current) + 4) % 4;
  if (diff == 0) {return Primitive::Forward;}
  if (diff == 3) {return Primitive::TurnLeft;}
  return Primitive::TurnRight;
}

/// First cell on a shortest box-avoiding path, or nullopt if unreachable.
std::optional<Cell> first_step(const BoxPushingState & s, Cell from, Cell to)
{
  const int n = s.size;
  std::vector<int> parent(static_cast<std::size_t>(n * n), -2);
  auto index = [n](Cell c) {return c.row * n + c.col;};
  std::deque<Cell> frontier{from};
  parent[index(from)] = -1;
  constexpr std::array<Heading, 4> order{Heading::Up, Heading::Right, Heading::Down, Heading::Left};
  while (!frontier.empty()) {
    const Cell c = frontier.front();
    frontier.pop_front();
    if (c == to) {
      Cell cur = c;
      while (parent[index(cur)] != index(from)) {
        const int p = parent[index(cur)];
        cur = Cell{p / n, p % n};
      }
      return cur;
    }
    for (Heading h : order) {
      const Cell next = step_from(c, h);
      if (!in_grid(s, next) || has_box(s, next) || parent[index(next)] != -2) {
        continue;
      }
      parent[index(next)] = index(c);
      frontier.push_back(next);
    }
  }
  return std::nullopt;
}

}  // namespace

Cell step_from(Cell c, Heading h)
{
  switch (h) {
    case Heading::Up: return {c.row - 1, c.col};
    case Heading::Right: return {c.row, c.col + 1};
    case Heading::Down: return {c.row + 1, c.col};
    case Heading::Left: return {c.row, c.col - 1};
  }
  return c;
}

Heading turned(Heading h, Primitive p)
{
  const int v = static_cast<int>(h);
  if (p == Primitive::TurnLeft) {return static_cast<Heading>((v + 3) % 4);}
  if (p == Primitive::TurnRight) {return static_cast<Heading>((v + 1) % 4);}
  return h;
}

char agent_glyph(Heading h)
{
  static constexpr char glyphs[4] = {'^', '>', 'v', '<'};
  return glyphs[static_cast<int>(h)];
}

BoxPushing::BoxPushing(int grid_size, int horizon)
: size_(grid_size), horizon_(horizon), state_(initial_state(grid_size))
{
  if (horizon <= 0) {
    throw std::invalid_argument("horizon must be positive");
  }
}

BoxPushingState BoxPushing::initial_state(int grid_size)
{
  if (std::find(kSupportedSizes.begin(), kSupportedSizes.end(), grid_size) == kSupportedSizes.end()) {
    throw std::invalid_argument(
            "unsupported BoxPushing grid size " + std::to_string(grid_size) +
            " (expected 6, 8, 10, 12 or 14)");
  }
  BoxPushingState s;
  s.size = grid_size;
  const int bottom = grid_size - 1;
  s.agents[0] = Pose{{bottom, 0}, Heading::Up};
  s.agents[1] = Pose{{bottom, grid_size - 1}, Heading::Up};
  s.big_box = Cell{bottom - 1, grid_size / 2 - 1};
  s.small_boxes = {Cell{bottom - 1, 1}, Cell{bottom - 1, grid_size - 2}};
  return s;
}

int BoxPushing::state_size() const
{
  return 2 * 6 + 2 + 2 * num_small_boxes() + 1;
}

void BoxPushing::reset(std::uint64_t /*seed*/)
{
  // The canonical layout has no randomness; the seed is part of the interface only.
  state_ = initial_state(size_);
  last_events_ = StepEvents{};
}

std::vector<int> BoxPushing::available_macro_actions(int /*agent*/) const
{
  std::vector<int> ids(static_cast<std::size_t>(num_macro_actions()));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    ids[i] = static_cast<int>(i);
  }
  return ids;
}

std::string BoxPushing::macro_action_name(int id) const
{
  if (id >= 0 && id < num_small_boxes()) {
    return "Go-to-Small-Box(" + std::to_string(id) + ")";
  }
  if (id == go_to_big_box()) {return "Go-to-Big-Box";}
  if (id == push()) {return "Push";}
  static const char * names[4] = {"Forward", "Turn-Left", "Turn-Right", "Stay"};
  const int p = id - num_small_boxes() - 2;
  if (p >= 0 && p < 4) {
    return names[p];
  }
  throw std::out_of_range("unknown macro-action id " + std::to_string(id));
}

std::optional<Pose> BoxPushing::waypoint(const BoxPushingState & s, int agent, int id) const
{
  if (id >= 0 && id < num_small_boxes()) {
    const Cell box = s.small_boxes[static_cast<std::size_t>(id)];
    return Pose{{box.row + 1, box.col}, Heading::Up};
  }
  if (id == go_to_big_box()) {
    return Pose{{s.big_box.row + 1, s.big_box.col + agent}, Heading::Up};
  }
  return std::nullopt;
}

Primitive BoxPushing::controller(const BoxPushingState & s, int agent, const ActiveMacro & active) const
{
  const Pose & pose = s.agents[static_cast<std::size_t>(agent)];
  if (active.id == push()) {
    return Primitive::Forward;
  }
  const int primitive = active.id - num_small_boxes() - 2;
  if (primitive >= 0 && primitive < 4) {
    return static_cast<Primitive>(primitive);
  }
  const auto target = waypoint(s, agent, active.id);
  if (!target) {
    throw std::out_of_range("unknown macro-action id " + std::to_string(active.id));
  }
  if (!in_grid(s, target->cell) || has_box(s, target->cell)) {
    return Primitive::Stay;
  }
  if (pose.cell == target->cell) {
    if (pose.heading == Heading::Up) {
      return Primitive::Stay;
    }
    return pose.heading == Heading::Right ? Primitive::TurnLeft : Primitive::TurnRight;
  }
  const auto next = first_step(s, pose.cell, target->cell);
  if (!next) {
    return Primitive::Stay;
  }
  return rotate_towards(pose.heading, heading_towards(pose.cell, *next));
}

BoxPushingStep BoxPushing::advance_state(
  const BoxPushingState & s, const std::vector<ActiveMacro> & active) const
{
  if (s.done) {
    throw std::logic_error("advance on a finished BoxPushing episode");
  }
  if (active.size() != 2) {
    throw std::invalid_argument("BoxPushing needs exactly two active macro-actions");
  }
  BoxPushingStep result;
  BoxPushingState & next = result.next;
  StepEvents & ev = result.events;
  next = s;
  next.t = s.t + 1;

  for (int i = 0; i < 2; ++i) {
    ev.primitives[i] = controller(s, i, active[static_cast<std::size_t>(i)]);
    next.agents[i].heading = turned(s.agents[i].heading, ev.primitives[i]);
  }

  enum class Kind { None, Move, PushSmall, PushBig };
  struct Proposal
  {
    Kind kind = Kind::None;
    Cell target;
    int box = -1;
    Cell box_dest;
  };
  std::array<Proposal, 2> prop;

  for (int i = 0; i < 2; ++i) {
    if (ev.primitives[i] != Primitive::Forward) {
      continue;
    }
    const Pose & pose = s.agents[i];
    const Cell target = step_from(pose.cell, pose.heading);
    ev.blocked[i] = true;
    if (!in_grid(s, target)) {
      ++ev.boundary_hits;
      continue;
    }
    if (target == s.agents[1 - i].cell) {
      continue;
    }
    if (on_big_box(s, target)) {
      prop[i] = {Kind::PushBig, target, -1, {}};
    } else if (const int b = small_box_at(s, target); b >= 0) {
      prop[i] = {Kind::PushSmall, target, b, step_from(target, pose.heading)};
    } else {
      prop[i] = {Kind::Move, target, -1, {}};
    }
  }

  // Big box: moves only under a joint push from the two cells on one side of it.
  const bool joint = prop[0].kind == Kind::PushBig && prop[1].kind == Kind::PushBig &&
    s.agents[0].heading == s.agents[1].heading && !(prop[0].target == prop[1].target) &&
    (s.agents[0].heading == Heading::Up || s.agents[0].heading == Heading::Down);
  if (joint) {
    const Cell dest = step_from(s.big_box, s.agents[0].heading);
    const Cell dest_right{dest.row, dest.col + 1};
    const bool free = in_grid(s, dest) && in_grid(s, dest_right) &&
      small_box_at(s, dest) < 0 && small_box_at(s, dest_right) < 0;
    if (free) {
      next.big_box = dest;
      ev.big_box_moved = true;
      for (int i = 0; i < 2; ++i) {
        next.agents[i].cell = prop[i].target;
        ev.blocked[i] = false;
      }
    }
    prop[0].kind = prop[1].kind = Kind::None;
  } else {
    for (auto & p : prop) {
      if (p.kind == Kind::PushBig) {
        ++ev.solo_big_box_pushes;
        p.kind = Kind::None;
      }
    }
  }

  for (int i = 0; i < 2; ++i) {
    Proposal & p = prop[i];
    if (p.kind != Kind::PushSmall) {
      continue;
    }
    const bool ok = in_grid(s, p.box_dest) && !on_big_box(next, p.box_dest) &&
      small_box_at(s, p.box_dest) < 0 && !(p.box_dest == s.agents[1 - i].cell);
    if (!ok) {
      p.kind = Kind::None;
    }
  }

  // Two proposals claiming the same cell (or the same box) cancel each other.
  if (prop[0].kind != Kind::None && prop[1].kind != Kind::None) {
    auto claims = [](const Proposal & p) {
        std::vector<Cell> c{p.target};
        if (p.kind == Kind::PushSmall) {c.push_back(p.box_dest);}
        return c;
      };
    bool clash = prop[0].kind == Kind::PushSmall && prop[1].kind == Kind::PushSmall &&
      prop[0].box == prop[1].box;
    for (const Cell & a : claims(prop[0])) {
      for (const Cell & b : claims(prop[1])) {
        clash = clash || a == b;
      }
    }
    if (clash) {
      prop[0].kind = prop[1].kind = Kind::None;
    }
  }

  for (int i = 0; i < 2; ++i) {
    const Proposal & p = prop[i];
    if (p.kind == Kind::Move || p.kind == Kind::PushSmall) {
      next.agents[i].cell = p.target;
      ev.blocked[i] = false;
      if (p.kind == Kind::PushSmall) {
        next.small_boxes[static_cast<std::size_t>(p.box)] = p.box_dest;
      }
    }
  }

  for (std::size_t b = 0; b < next.small_boxes.size(); ++b) {
    if (next.small_boxes[b].row == 0 && s.small_boxes[b].row != 0) {
      ++ev.small_boxes_delivered;
    }
  }
  ev.big_box_delivered = next.big_box.row == 0 && s.big_box.row != 0;

  StepOutcome & out = result.outcome;
  out.reward = (ev.big_box_delivered ? kBigBoxReward : 0.0) +
    kSmallBoxReward * ev.small_boxes_delivered +
    kPenalty * (ev.boundary_hits + ev.solo_big_box_pushes);
  out.done = ev.big_box_delivered || ev.small_boxes_delivered > 0 || next.t >= horizon_;
  next.done = out.done;

  out.terminated.assign(2, 0);
  for (int i = 0; i < 2; ++i) {
    const ActiveMacro & a = active[static_cast<std::size_t>(i)];
    bool term = false;
    if (out.done) {
      term = true;
    } else if (a.id == push()) {
      term = ev.blocked[i];
    } else if (const auto wp = waypoint(s, i, a.id)) {
      const auto wp_next = waypoint(next, i, a.id);
      const bool unreachable = !in_grid(s, wp->cell) || has_box(s, wp->cell) ||
        (!(s.agents[i].cell == wp->cell) && !first_step(s, s.agents[i].cell, wp->cell));
      term = unreachable || next.agents[i] == *wp_next || a.internal_step + 1 >= navigation_timeout();
    } else {
      term = true;
    }
    out.terminated[static_cast<std::size_t>(i)] = term ? 1 : 0;
  }
  return result;
}

StepOutcome BoxPushing::advance(const std::vector<ActiveMacro> & active)
{
  BoxPushingStep step = advance_state(state_, active);
  state_ = step.next;
  last_events_ = step.events;
  return step.outcome;
}

CellContent BoxPushing::front_cell(const BoxPushingState & s, int agent) const
{
  const Pose & pose = s.agents[static_cast<std::size_t>(agent)];
  const Cell ahead = step_from(pose.cell, pose.heading);
  if (!in_grid(s, ahead)) {return CellContent::Boundary;}
  if (ahead == s.agents[static_cast<std::size_t>(1 - agent)].cell) {return CellContent::Teammate;}
  if (on_big_box(s, ahead)) {return CellContent::BigBox;}
  if (small_box_at(s, ahead) >= 0) {return CellContent::SmallBox;}
  return CellContent::Empty;
}

VectorXd BoxPushing::observation_of(const BoxPushingState & s, int agent) const
{
  VectorXd obs = VectorXd::Zero(kCellCategories);
  obs(static_cast<int>(front_cell(s, agent))) = 1.0;
  return obs;
}

VectorXd BoxPushing::features_of(const BoxPushingState & s) const
{
  VectorXd f = VectorXd::Zero(state_size());
  const double scale = 1.0 / (s.size - 1);
  int at = 0;
  for (const Pose & p : s.agents) {
    f(at++) = p.cell.row * scale;
    f(at++) = p.cell.col * scale;
    f(at + static_cast<int>(p.heading)) = 1.0;
    at += 4;
  }
  f(at++) = s.big_box.row * scale;
  f(at++) = s.big_box.col * scale;
  for (const Cell & b : s.small_boxes) {
    f(at++) = b.row * scale;
    f(at++) = b.col * scale;
  }
  f(at++) = static_cast<double>(s.t) / horizon_;
  return f;
}

std::string BoxPushing::render_state(const BoxPushingState & s) const
{
  std::vector<std::string> rows(static_cast<std::size_t>(s.size), std::string(static_cast<std::size_t>(s.size), '.'));
  for (const Cell & b : s.small_boxes) {
    rows[b.row][b.col] = 'b';
  }
  rows[s.big_box.row][s.big_box.col] = 'B';
  rows[s.big_box.row][s.big_box.col + 1] = 'B';
  for (const Pose & p : s.agents) {
    rows[p.cell.row][p.cell.col] = agent_glyph(p.heading);
  }
  std::string out;
  for (const auto & r : rows) {
    out += r;
    out += '\n';
  }
  return out;
}

std::vector<std::vector<CellContent>> parse_render(const std::string & text)
{
  std::vector<std::vector<CellContent>> grid;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<CellContent> row;
    for (char c : line) {
      switch (c) {
        case '.': row.push_back(CellContent::Empty); break;
        case 'b': row.push_back(CellContent::SmallBox); break;
        case 'B': row.push_back(CellContent::BigBox); break;
        case '^': case '>': case 'v': case '<': row.push_back(CellContent::Teammate); break;
        default: throw std::invalid_argument(std::string("unknown glyph '") + c + "'");
      }
    }
    grid.push_back(std::move(row));
  }
  return grid;
}

}  // namespace tomac::env
