#pragma once

#include "tomac/env/macro_env.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace tomac::env
{

enum class Heading { Up = 0, Right = 1, Down = 2, Left = 3 };

enum class Primitive { Forward = 0, TurnLeft = 1, TurnRight = 2, Stay = 3 };

/// Category of the cell in front of an agent; the macro-observation is its one-hot.
enum class CellContent { Empty = 0, Teammate = 1, Boundary = 2, SmallBox = 3, BigBox = 4 };

inline constexpr int kCellCategories = 5;

struct Cell
{
  int row = 0;
  int col = 0;
  bool operator==(const Cell &) const = default;
};

struct Pose
{
  Cell cell;
  Heading heading = Heading::Up;
  bool operator==(const Pose &) const = default;
};

/// Two agents, one 1x2 big box (cell = its left half) and the small boxes.
/// Row 0 is the goal row at the top of the grid.
struct BoxPushingState
{
  int size = 6;
  std::array<Pose, 2> agents;
  Cell big_box;
  std::vector<Cell> small_boxes;
  int t = 0;
  bool done = false;
  bool operator==(const BoxPushingState &) const = default;
};

/// What happened during one primitive step; the reward is a function of these counts.
struct StepEvents
{
  std::array<Primitive, 2> primitives{Primitive::Stay, Primitive::Stay};
  int boundary_hits = 0;
  int solo_big_box_pushes = 0;
  int small_boxes_delivered = 0;
  bool big_box_delivered = false;
  bool big_box_moved = false;
  /// Forward attempted but the agent did not move.
  std::array<bool, 2> blocked{false, false};
};

struct BoxPushingStep
{
  BoxPushingState next;
  StepOutcome outcome;
  StepEvents events;
};

inline constexpr double kBigBoxReward = 100.0;
inline constexpr double kSmallBoxReward = 10.0;
inline constexpr double kPenalty = -10.0;

/// Cooperative box pushing with scripted macro-action controllers.
///
/// Macro-action ids for k small boxes: [0, k) Go-to-Small-Box(i), k Go-to-Big-Box,
/// k+1 Push, then the one-step primitives Forward, Turn-Left, Turn-Right, Stay.
class BoxPushing final : public MacroEnv
{
public:
  static constexpr std::array<int, 5> kSupportedSizes{6, 8, 10, 12, 14};

  explicit BoxPushing(int grid_size = 6, int horizon = 100);

  /// Canonical start layout: agents in the bottom corners facing up, big box centred one
  /// row above them, one small box on each side of it.
  static BoxPushingState initial_state(int grid_size);

  int grid_size() const {return size_;}
  int num_small_boxes() const {return 2;}
  int go_to_small_box(int i) const {return i;}
  int go_to_big_box() const {return num_small_boxes();}
  int push() const {return num_small_boxes() + 1;}
  int primitive_action(Primitive p) const {return num_small_boxes() + 2 + static_cast<int>(p);}
  /// Steps after which a Go-to macro-action gives up.
  int navigation_timeout() const {return 4 * size_;}

  /// Waypoint a Go-to macro-action drives to, or nullopt if `id` is not a Go-to.
  std::optional<Pose> waypoint(const BoxPushingState & s, int agent, int id) const;
  Primitive controller(const BoxPushingState & s, int agent, const ActiveMacro & active) const;
  BoxPushingStep advance_state(const BoxPushingState & s, const std::vector<ActiveMacro> & active) const;
  CellContent front_cell(const BoxPushingState & s, int agent) const;
  VectorXd observation_of(const BoxPushingState & s, int agent) const;
  VectorXd features_of(const BoxPushingState & s) const;
  std::string render_state(const BoxPushingState & s) const;

  const BoxPushingState & state() const {return state_;}
  void set_state(const BoxPushingState & s) {state_ = s;}
  const StepEvents & last_events() const {return last_events_;}

  std::string name() const override {return "boxpushing";}
  int num_agents() const override {return 2;}
  int num_macro_actions() const override {return num_small_boxes() + 6;}
  int observation_size() const override {return kCellCategories;}
  int state_size() const override;
  int horizon() const override {return horizon_;}
  int time() const override {return state_.t;}
  bool done() const override {return state_.done;}
  void reset(std::uint64_t seed) override;
  std::vector<int> available_macro_actions(int agent) const override;
  std::string macro_action_name(int id) const override;
  StepOutcome advance(const std::vector<ActiveMacro> & active) override;
  VectorXd macro_observation(int agent) const override {return observation_of(state_, agent);}
  VectorXd state_features() const override {return features_of(state_);}
  std::string render() const override {return render_state(state_);}
  std::unique_ptr<MacroEnv> clone() const override {return std::make_unique<BoxPushing>(*this);}

private:
  int size_;
  int horizon_;
  BoxPushingState state_;
  StepEvents last_events_;
};

/// Glyphs: '.' empty, 'b' small box, 'B' big box, agents '^' '>' 'v' '<' by heading.
char agent_glyph(Heading h);

/// Parses a rendered grid back into per-cell contents (row-major), using the agent-free
/// categories plus `Teammate` for any agent glyph.
std::vector<std::vector<CellContent>> parse_render(const std::string & text);

Cell step_from(Cell c, Heading h);
Heading turned(Heading h, Primitive p);

}  // namespace tomac::env
