#pragma once

#include "metareason/mdp.hpp"

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace metareason::grid {

enum class Direction { kNorth = 0, kSouth = 1, kEast = 2, kWest = 3 };

/// Action indices of every grid domain. Movement actions share the numbering
/// of Direction.
inline constexpr ActionIndex kNorth = 0;
inline constexpr ActionIndex kSouth = 1;
inline constexpr ActionIndex kEast = 2;
inline constexpr ActionIndex kWest = 3;
inline constexpr ActionIndex kNop = 4;
inline constexpr std::size_t kActionCount = 5;

struct Cell {
  int x = 0;  // east
  int y = 0;  // north
  friend bool operator==(const Cell&, const Cell&) = default;
};

struct Offset {
  int dx = 0;
  int dy = 0;
};

constexpr Offset unit(Direction d) {
  switch (d) {
    case Direction::kNorth: return {0, 1};
    case Direction::kSouth: return {0, -1};
    case Direction::kEast: return {1, 0};
    case Direction::kWest: return {-1, 0};
  }
  return {};
}

/// One possible wind push and its probability. Direction names the push
/// direction: a westerly wind pushes west.
struct WindOutcome {
  Direction direction;
  double probability;
};
using WindMixture = std::vector<WindOutcome>;

enum class NopDynamics { kStayInPlace, kDriftWithWind };

struct GridSpec {
  int width = 100;
  int height = 100;
  int move_cells = 11;
  int wind_cells = 10;
  std::vector<WindMixture> wind_field;  // row-major, index y * width + x
  NopDynamics nop_dynamics = NopDynamics::kStayInPlace;
  std::vector<double> cost_think;
  std::vector<double> cost_act;
  Cell start_cell{99, 0};
  Cell goal_cell{99, 99};

  std::size_t cell_count() const { return static_cast<std::size_t>(width) * height; }
  StateIndex index(Cell c) const { return static_cast<StateIndex>(c.y) * width + c.x; }
  Cell cell(StateIndex s) const {
    return {static_cast<int>(s % width), static_cast<int>(s / width)};
  }
  Cell clamp(Cell c) const {
    return {std::clamp(c.x, 0, width - 1), std::clamp(c.y, 0, height - 1)};
  }
  int manhattan_to_goal(Cell c) const {
    return std::abs(c.x - goal_cell.x) + std::abs(c.y - goal_cell.y);
  }
};

enum class DomainKind { kStochastic, kTraps, kDynamicNop1, kDynamicNop2 };

inline std::string_view to_string(DomainKind k) {
  switch (k) {
    case DomainKind::kStochastic: return "stochastic";
    case DomainKind::kTraps: return "traps";
    case DomainKind::kDynamicNop1: return "dynamicnop1";
    case DomainKind::kDynamicNop2: return "dynamicnop2";
  }
  return "unknown";
}

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline DomainKind parse_domain_kind(std::string_view name) {
  if (name == "stochastic") return DomainKind::kStochastic;
  if (name == "traps") return DomainKind::kTraps;
  if (name == "dynamicnop1" || name == "dynamicnop-1") return DomainKind::kDynamicNop1;
  if (name == "dynamicnop2" || name == "dynamicnop-2") return DomainKind::kDynamicNop2;
  throw ConfigError("unknown domain kind '" + std::string(name) + "'");
}

struct DomainConfig {
  DomainKind kind = DomainKind::kStochastic;
  double cost_think = 1.0;
  double cost_act = 11.0;
  /// Manhattan multiplier of the upper bound; cost_act when absent.
  std::optional<double> upper_heuristic_scale;
  /// Think and act cost at the start cell of the traps domain.
  double trap_cost = 100.0;

  double scale() const { return upper_heuristic_scale.value_or(cost_act); }

  /// The costs each domain is described with: traps thinks at 10 and acts at
  /// 11, the others think at 1 and act at 11.
  static DomainConfig defaults(DomainKind kind) {
    DomainConfig c;
    c.kind = kind;
    if (kind == DomainKind::kTraps) c.cost_think = 10.0;
    return c;
  }

  void validate() const {
    if (!(cost_think > 0.0) || !(cost_act > 0.0))
      throw ConfigError("domain costs must be positive");
    if (!(scale() > 0.0)) throw ConfigError("upper_heuristic_scale must be positive");
    if (!(trap_cost > 0.0)) throw ConfigError("trap_cost must be positive");
  }
};

/// Landing cell for a movement action (or NOP) under a particular wind push.
/// Each coordinate is clamped to the grid independently.
inline Cell resolve_move(const GridSpec& spec, Cell from, ActionIndex action, Direction wind) {
  const Offset w = unit(wind);
  if (action == kNop) {
    if (spec.nop_dynamics == NopDynamics::kStayInPlace) return from;
    return spec.clamp({from.x + spec.wind_cells * w.dx, from.y + spec.wind_cells * w.dy});
  }
  if (action > kWest) throw ContractViolation("resolve_move: unknown action");
  const Offset m = unit(static_cast<Direction>(action));
  // A head wind must not cancel or reverse the move.
  const int along = spec.move_cells + spec.wind_cells * (w.dx * m.dx + w.dy * m.dy);
  if (along < 1) throw ContractViolation("resolve_move: wind reverses the agent's intent");
  return spec.clamp({from.x + spec.move_cells * m.dx + spec.wind_cells * w.dx,
                     from.y + spec.move_cells * m.dy + spec.wind_cells * w.dy});
}

struct Domain {
  BaseMdp mdp;
  GridSpec spec;
  DomainConfig config;
};

namespace detail {

inline WindMixture mixture(Direction prevailing) {
  // 60% prevailing, 20% for each orthogonal direction.
  const bool vertical = prevailing == Direction::kNorth || prevailing == Direction::kSouth;
  const Direction a = vertical ? Direction::kEast : Direction::kNorth;
  const Direction b = vertical ? Direction::kWest : Direction::kSouth;
  return {{prevailing, 0.6}, {a, 0.2}, {b, 0.2}};
}

inline void check_spec(const GridSpec& spec) {
  if (!(spec.move_cells > spec.wind_cells && spec.wind_cells >= 0))
    throw ConfigError("move_cells must exceed wind_cells >= 0");
  for (const auto& mix : spec.wind_field) {
    double sum = 0.0;
    for (const auto& w : mix) sum += w.probability;
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("wind mixture does not sum to 1");
  }
}

}  // namespace detail

/// Wind layout, costs and NOP semantics of a domain kind, without the MDP.
inline GridSpec make_spec(const DomainConfig& cfg) {
  cfg.validate();
  GridSpec spec;
  const std::size_t n = spec.cell_count();
  spec.wind_field.resize(n);
  spec.cost_think.assign(n, cfg.cost_think);
  spec.cost_act.assign(n, cfg.cost_act);
  const int east = spec.width - 1;
  const int north = spec.height - 1;

  switch (cfg.kind) {
    case DomainKind::kStochastic:
    case DomainKind::kTraps:
      spec.start_cell = {east, 0};
      for (StateIndex s = 0; s < n; ++s) {
        const Cell c = spec.cell(s);
        // The start/goal column blows south with no orthogonal component.
        spec.wind_field[s] = c.x == east ? WindMixture{{Direction::kSouth, 1.0}}
                                         : detail::mixture(Direction::kNorth);
      }
      if (cfg.kind == DomainKind::kTraps) {
        const StateIndex start = spec.index(spec.start_cell);
        spec.cost_think[start] = cfg.trap_cost;
        spec.cost_act[start] = cfg.trap_cost;
      }
      break;
    case DomainKind::kDynamicNop1:
    case DomainKind::kDynamicNop2:
      spec.start_cell = {98, 1};
      spec.nop_dynamics = NopDynamics::kDriftWithWind;
      for (StateIndex s = 0; s < n; ++s) {
        const Cell c = spec.cell(s);
        if (c.x == east)
          spec.wind_field[s] = {{Direction::kNorth, 1.0}};
        else if (c.y == 0)
          spec.wind_field[s] = {{Direction::kEast, 1.0}};
        else if (cfg.kind == DomainKind::kDynamicNop2 && c.y == north)
          spec.wind_field[s] = {{Direction::kEast, 1.0}};
        else
          spec.wind_field[s] = {{Direction::kWest, 0.8}, {Direction::kNorth, 0.2}};
      }
      break;
  }
  detail::check_spec(spec);
  return spec;
}

/// Grid SSP MDP for a spec: one state per cell, actions {N, S, E, W, NOP}.
inline BaseMdp build_mdp(const GridSpec& spec) {
  detail::check_spec(spec);
  MdpBuilder b(spec.cell_count(), kActionCount, kNop, spec.index(spec.start_cell),
               spec.index(spec.goal_cell));
  for (StateIndex s = 0; s < spec.cell_count(); ++s) {
    if (s == spec.index(spec.goal_cell)) continue;
    const Cell from = spec.cell(s);
    for (ActionIndex a = 0; a < kActionCount; ++a) {
      for (const auto& w : spec.wind_field[s])
        b.add_transition(s, a, spec.index(resolve_move(spec, from, a, w.direction)),
                         w.probability);
      b.set_cost(s, a, a == kNop ? spec.cost_think[s] : spec.cost_act[s]);
    }
  }
  return b.build();
}

inline Domain build_domain(const DomainConfig& cfg) {
  GridSpec spec = make_spec(cfg);
  BaseMdp mdp = build_mdp(spec);
  return {std::move(mdp), std::move(spec), cfg};
}

struct HeuristicBounds {
  ValueFn lower;
  ValueFn upper;
};

/**
 * Zero lower bound and scaled-Manhattan upper bound.
 *
 * upper(s) = scale * manhattan(s, goal) + max(0, act_cost(s) - scale). The
 * surcharge term is zero wherever acting costs no more than the scale; it only
 * lifts cells with an unusually expensive action (the traps start cell) so the
 * bound stays monotone there.
 */
inline HeuristicBounds heuristic_bounds(const GridSpec& spec, const DomainConfig& cfg) {
  const double scale = cfg.scale();
  HeuristicBounds h;
  h.lower.assign(spec.cell_count(), 0.0);
  h.upper.assign(spec.cell_count(), 0.0);
  for (StateIndex s = 0; s < spec.cell_count(); ++s) {
    const Cell c = spec.cell(s);
    if (c == spec.goal_cell) continue;
    h.upper[s] = scale * spec.manhattan_to_goal(c) + std::max(0.0, spec.cost_act[s] - scale);
  }
  return h;
}

/// Largest amount by which min_a [C(s,a) + E upper(s')] exceeds upper(s) over
/// non-NOP actions; a monotone upper bound has this at or below zero.
inline double monotonicity_excess(const BaseMdp& m, const ValueFn& upper) {
  double worst = -kInfinity;
  for (StateIndex s = 0; s < m.state_count(); ++s) {
    if (m.is_goal(s)) continue;
    const double b = metareason::detail::bellman_min(m, upper, s, ActionSet::kExcludeNop);
    worst = std::max(worst, b - upper[s]);
  }
  return worst;
}

}  // namespace metareason::grid
