#include "metareason/gridworld.hpp"

#include <gtest/gtest.h>

using namespace metareason;
using namespace metareason::grid;

namespace {

GridSpec open_grid(NopDynamics nop = NopDynamics::kStayInPlace) {
  GridSpec g;
  g.wind_field.assign(g.cell_count(), {{Direction::kNorth, 1.0}});
  g.cost_think.assign(g.cell_count(), 1.0);
  g.cost_act.assign(g.cell_count(), 11.0);
  g.nop_dynamics = nop;
  return g;
}

}  // namespace

TEST(ResolveMove, WindAddsToIntendedMove) {
  const GridSpec g = open_grid();
  EXPECT_EQ(resolve_move(g, {50, 50}, kNorth, Direction::kNorth), (Cell{50, 71}));
  EXPECT_EQ(resolve_move(g, {50, 50}, kNorth, Direction::kSouth), (Cell{50, 51}));
  EXPECT_EQ(resolve_move(g, {50, 50}, kNorth, Direction::kEast), (Cell{60, 61}));
  EXPECT_EQ(resolve_move(g, {50, 50}, kWest, Direction::kNorth), (Cell{39, 60}));
}

TEST(ResolveMove, WindNeverReversesIntent) {
  const GridSpec g = open_grid();
  for (ActionIndex a = 0; a < 4; ++a)
    for (auto w : {Direction::kNorth, Direction::kSouth, Direction::kEast, Direction::kWest}) {
      const Cell from{50, 50};
      const Cell to = resolve_move(g, from, a, w);
      const Offset d = unit(static_cast<Direction>(a));
      EXPECT_GE((to.x - from.x) * d.dx + (to.y - from.y) * d.dy, 1);
    }
}

TEST(ResolveMove, ClampsEachAxisAtTheBorder) {
  const GridSpec g = open_grid();
  EXPECT_EQ(resolve_move(g, {95, 98}, kEast, Direction::kNorth), (Cell{99, 99}));
  EXPECT_EQ(resolve_move(g, {3, 0}, kSouth, Direction::kWest), (Cell{0, 0}));
}

TEST(ResolveMove, NopStaysOrDrifts) {
  EXPECT_EQ(resolve_move(open_grid(), {10, 10}, kNop, Direction::kWest), (Cell{10, 10}));
  const GridSpec drift = open_grid(NopDynamics::kDriftWithWind);
  EXPECT_EQ(resolve_move(drift, {10, 10}, kNop, Direction::kWest), (Cell{0, 10}));
  EXPECT_EQ(resolve_move(drift, {10, 10}, kNop, Direction::kNorth), (Cell{10, 20}));
}

TEST(ResolveMove, RejectsWindStrongerThanMove) {
  GridSpec g = open_grid();
  g.wind_cells = 12;
  EXPECT_THROW(resolve_move(g, {50, 50}, kNorth, Direction::kSouth), ContractViolation);
}

TEST(DomainConfig, ParsesKindsAndRejectsUnknown) {
  EXPECT_EQ(parse_domain_kind("traps"), DomainKind::kTraps);
  EXPECT_EQ(parse_domain_kind("dynamicnop-2"), DomainKind::kDynamicNop2);
  EXPECT_THROW(parse_domain_kind("lava"), ConfigError);
  for (auto k : {DomainKind::kStochastic, DomainKind::kTraps, DomainKind::kDynamicNop1,
                 DomainKind::kDynamicNop2})
    EXPECT_EQ(parse_domain_kind(to_string(k)), k);
}

TEST(DomainConfig, RejectsNonPositiveCosts) {
  DomainConfig c;
  c.cost_think = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = DomainConfig{};
  c.upper_heuristic_scale = -1.0;
  EXPECT_THROW(make_spec(c), ConfigError);
}

TEST(DomainConfig, TrapsDefaultsThinkAtTenActAtEleven) {
  const auto c = DomainConfig::defaults(DomainKind::kTraps);
  EXPECT_EQ(c.cost_think, 10.0);
  EXPECT_EQ(c.cost_act, 11.0);
  EXPECT_EQ(c.scale(), 11.0);
}

TEST(Stochastic, LayoutStartGoalAndWinds) {
  const GridSpec g = make_spec(DomainConfig::defaults(DomainKind::kStochastic));
  EXPECT_EQ(g.start_cell, (Cell{99, 0}));
  EXPECT_EQ(g.goal_cell, (Cell{99, 99}));
  const auto& column = g.wind_field[g.index({99, 40})];
  ASSERT_EQ(column.size(), 1u);
  EXPECT_EQ(column[0].direction, Direction::kSouth);
  const auto& interior = g.wind_field[g.index({40, 40})];
  ASSERT_EQ(interior.size(), 3u);
  EXPECT_EQ(interior[0].direction, Direction::kNorth);
  EXPECT_DOUBLE_EQ(interior[0].probability, 0.6);
  EXPECT_EQ(g.nop_dynamics, NopDynamics::kStayInPlace);
}

TEST(Traps, StartCellIsExpensive) {
  const GridSpec g = make_spec(DomainConfig::defaults(DomainKind::kTraps));
  const StateIndex s0 = g.index(g.start_cell);
  EXPECT_EQ(g.cost_think[s0], 100.0);
  EXPECT_EQ(g.cost_act[s0], 100.0);
  EXPECT_EQ(g.cost_think[s0 - 1], 10.0);
  EXPECT_EQ(g.cost_act[s0 - 1], 11.0);
}

TEST(DynamicNop, LayoutJetstreams) {
  const GridSpec g1 = make_spec(DomainConfig::defaults(DomainKind::kDynamicNop1));
  const GridSpec g2 = make_spec(DomainConfig::defaults(DomainKind::kDynamicNop2));
  EXPECT_EQ(g1.start_cell, (Cell{98, 1}));
  EXPECT_EQ(g1.nop_dynamics, NopDynamics::kDriftWithWind);
  EXPECT_EQ(g1.wind_field[g1.index({40, 0})][0].direction, Direction::kEast);
  EXPECT_EQ(g1.wind_field[g1.index({99, 50})][0].direction, Direction::kNorth);
  EXPECT_EQ(g1.wind_field[g1.index({40, 99})][0].direction, Direction::kWest);
  EXPECT_EQ(g2.wind_field[g2.index({40, 99})][0].direction, Direction::kEast);
  const auto& west = g1.wind_field[g1.index({40, 40})];
  ASSERT_EQ(west.size(), 2u);
  EXPECT_DOUBLE_EQ(west[0].probability, 0.8);
  EXPECT_EQ(west[1].direction, Direction::kNorth);
}

TEST(BuildDomain, EveryDomainIsAnSspWithoutNop) {
  for (auto k : {DomainKind::kStochastic, DomainKind::kTraps, DomainKind::kDynamicNop1,
                 DomainKind::kDynamicNop2}) {
    const Domain d = build_domain(DomainConfig::defaults(k));
    EXPECT_EQ(d.mdp.state_count(), 10000u);
    EXPECT_EQ(d.mdp.action_count(), kActionCount);
    EXPECT_EQ(d.mdp.nop_action(), kNop);
    const auto r = validate_ssp(d.mdp, ActionSet::kExcludeNop);
    EXPECT_TRUE(r.is_ssp) << to_string(k);
  }
}

TEST(BuildDomain, CostsComeFromTheConfig) {
  DomainConfig c;
  c.cost_think = 3.0;
  c.cost_act = 7.0;
  const Domain d = build_domain(c);
  EXPECT_EQ(d.mdp.cost(5, kNop), 3.0);
  EXPECT_EQ(d.mdp.cost(5, kEast), 7.0);
}

TEST(HeuristicBounds, ScaledManhattanUpperAndZeroLower) {
  const auto cfg = DomainConfig::defaults(DomainKind::kStochastic);
  const GridSpec g = make_spec(cfg);
  const auto h = heuristic_bounds(g, cfg);
  EXPECT_EQ(h.upper[g.index(g.start_cell)], 1089.0);
  EXPECT_EQ(h.upper[g.index(g.goal_cell)], 0.0);
  EXPECT_EQ(h.upper[g.index({0, 0})], 11.0 * 198);
  for (double v : h.lower) EXPECT_EQ(v, 0.0);
}

TEST(HeuristicBounds, UpperIsMonotoneOnAllDomains) {
  for (auto k : {DomainKind::kStochastic, DomainKind::kTraps, DomainKind::kDynamicNop1,
                 DomainKind::kDynamicNop2}) {
    const auto cfg = DomainConfig::defaults(k);
    const Domain d = build_domain(cfg);
    const auto h = heuristic_bounds(d.spec, cfg);
    EXPECT_LE(monotonicity_excess(d.mdp, h.upper), 1e-9) << to_string(k);
  }
}

TEST(HeuristicBounds, SmallScaleIsNotAnUpperBound) {
  DomainConfig cfg;
  cfg.upper_heuristic_scale = 1.0;
  const Domain d = build_domain(cfg);
  EXPECT_GT(monotonicity_excess(d.mdp, heuristic_bounds(d.spec, cfg).upper), 0.0);
}
