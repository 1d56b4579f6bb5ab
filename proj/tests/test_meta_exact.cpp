#include "metareason/meta_exact.hpp"

#include <gtest/gtest.h>

#include "support.hpp"

using namespace metareason;
using testing_support::chain_mdp;
using testing_support::random_ssp;

namespace {

/// s0: action 0 to the goal at cost 5, action 1 to s1 at cost 1; s1 reaches
/// the goal at cost 10. A zero-value solver first recommends the trap.
BaseMdp detour_mdp(double nop_cost) {
  MdpBuilder b(3, 3, 2, 0, 2);
  b.add_transition(0, 0, 2, 1.0).set_cost(0, 0, 5.0);
  b.add_transition(0, 1, 1, 1.0).set_cost(0, 1, 1.0);
  b.add_transition(0, 2, 0, 1.0).set_cost(0, 2, nop_cost);
  b.add_transition(1, 0, 2, 1.0).set_cost(1, 0, 10.0);
  b.add_transition(1, 2, 1, 1.0).set_cost(1, 2, nop_cost);
  return b.build();
}

double optimum_without_nop(const BaseMdp& m) {
  SolveOptions o;
  o.actions = ActionSet::kExcludeNop;
  return value_iteration(m, o).value[m.start_state()];
}

/// Checks that every product state offers exactly NOP (advancing the
/// configuration) and f(s, chi_i) (keeping it), with copied costs.
void audit_structure(const BaseMdp& m, const SolverTrace& trace, const MetaMdp& mm) {
  const std::size_t n = m.state_count(), k = trace.length();
  ASSERT_EQ(mm.product.state_count(), n * k);
  const ActionIndex nop = m.nop_action();
  for (std::size_t i = 0; i < k; ++i) {
    for (StateIndex s = 0; s < n; ++s) {
      const StateIndex x = mm.encode(s, i);
      ASSERT_EQ(mm.base_state(x), s);
      ASSERT_EQ(mm.configuration(x), i);
      if (m.is_goal(s)) {
        EXPECT_TRUE(mm.product.is_goal(x));
        continue;
      }
      const ActionIndex f = trace.policies[i][s];
      for (ActionIndex a = 0; a < m.action_count(); ++a) {
        const bool expect = (a == nop && m.enabled(s, nop)) || (a == f && m.enabled(s, a));
        ASSERT_EQ(mm.product.enabled(x, a), expect) << "s=" << s << " i=" << i << " a=" << a;
        if (!expect) continue;
        EXPECT_EQ(mm.product.cost(x, a), m.cost(s, a));
        const std::size_t to_config = a == nop ? std::min(i + 1, k - 1) : i;
        const auto base = m.successors(s, a);
        const auto meta = mm.product.successors(x, a);
        ASSERT_EQ(base.size(), meta.size());
        for (std::size_t j = 0; j < base.size(); ++j) {
          EXPECT_EQ(meta[j].state, mm.encode(base[j].state, to_config));
          EXPECT_DOUBLE_EQ(meta[j].probability, base[j].probability);
        }
      }
    }
  }
}

}  // namespace

TEST(InstrumentSolver, ChainRecordsOneConfigurationPerChangingSweep) {
  const auto t = instrument_solver(chain_mdp(3));
  ASSERT_EQ(t.length(), 3u);
  EXPECT_EQ(t.values[0], (ValueFn{0, 0, 0}));
  EXPECT_EQ(t.values[1], (ValueFn{1, 1, 0}));
  EXPECT_EQ(t.values[2], (ValueFn{2, 1, 0}));
  for (const auto& pi : t.policies) EXPECT_EQ(pi[0], 0u);
}

TEST(InstrumentSolver, StartingAtTheOptimumGivesOneConfiguration) {
  const BaseMdp m = chain_mdp(4);
  InstrumentOptions o;
  o.initial = ValueFn{3, 2, 1, 0};
  EXPECT_EQ(instrument_solver(m, o).length(), 1u);
}

TEST(InstrumentSolver, GranularityThinsTheTrace) {
  const BaseMdp m = chain_mdp(8);
  const auto fine = instrument_solver(m);
  InstrumentOptions o;
  o.granularity = 3;
  const auto coarse = instrument_solver(m, o);
  EXPECT_EQ(fine.length(), 8u);
  EXPECT_EQ(coarse.length(), 4u);  // sweeps 0, 3, 6, 7
  EXPECT_EQ(coarse.values.back(), fine.values.back());
  o.granularity = 0;
  EXPECT_THROW(instrument_solver(m, o), ContractViolation);
}

TEST(InstrumentSolver, SizeCapIsEnforced) {
  InstrumentOptions o;
  o.size_cap = 10;
  EXPECT_THROW(instrument_solver(chain_mdp(4), o), SizeError);
  o.size_cap = 16;
  EXPECT_NO_THROW(instrument_solver(chain_mdp(4), o));
}

TEST(MetaMdp, ProductSizeAndStructure) {
  for (const BaseMdp& m : {chain_mdp(3), detour_mdp(2.0)}) {
    const auto t = instrument_solver(m);
    const auto mm = construct_meta_mdp(m, t);
    EXPECT_EQ(mm.product.state_count(), m.state_count() * t.length());
    audit_structure(m, t, mm);
  }
}

TEST(MetaMdp, DetourIsWorthOneThink) {
  const BaseMdp m = detour_mdp(2.0);
  const auto t = instrument_solver(m);
  ASSERT_EQ(t.length(), 3u);
  EXPECT_EQ(t.policies[0][0], 1u);
  EXPECT_EQ(t.policies[1][0], 0u);
  const auto mm = construct_meta_mdp(m, t);
  const auto sol = solve_meta(mm);
  EXPECT_NEAR(sol.value[mm.product.start_state()], 7.0, 1e-9);
  EXPECT_EQ(sol.policy[mm.product.start_state()], m.nop_action());
  EXPECT_NEAR(schedule_cost(m, t.policies[0]), 11.0, 1e-9);
  // Expensive thinking: act on the first recommendation.
  const BaseMdp pricey = detour_mdp(7.0);
  const auto mp = construct_meta_mdp(pricey, instrument_solver(pricey));
  EXPECT_NEAR(solve_meta(mp).value[mp.product.start_state()], 11.0, 1e-9);
}

TEST(MetaMdp, ChainMetaValueIsActingStraightAway) {
  const BaseMdp m = chain_mdp(3);
  const auto mm = construct_meta_mdp(m, instrument_solver(m));
  EXPECT_NEAR(solve_meta(mm).value[mm.product.start_state()], 2.0, 1e-9);
}

TEST(MetaMdp, RejectsMismatchedTrace) {
  SolverTrace empty;
  EXPECT_THROW(construct_meta_mdp(chain_mdp(3), empty), ContractViolation);
  const auto t = instrument_solver(chain_mdp(4));
  EXPECT_THROW(construct_meta_mdp(chain_mdp(3), t), ContractViolation);
}

TEST(MetaMdp, RandomProductsAreSspsAndNoBetterThanTheOptimum) {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 40; ++i) {
    const BaseMdp m = random_ssp(rng);
    const auto t = instrument_solver(m);
    const auto mm = construct_meta_mdp(m, t);
    EXPECT_TRUE(validate_ssp(mm.product).is_ssp) << i;
    audit_structure(m, t, mm);
    const double meta = solve_meta(mm).value[mm.product.start_state()];
    const double star = value_iteration(m).value[m.start_state()];
    EXPECT_GE(meta, star - 1e-7) << i;
    EXPECT_LE(meta, schedule_cost(m, t.policies[0]) + 1e-7) << i;
  }
}

TEST(Lollypop, LayoutAndCosts) {
  const BaseMdp m = chain_mdp(3, 4.0);
  const BaseMdp l = construct_lollypop(m, 3);
  ASSERT_EQ(l.state_count(), 3u + 4u);
  EXPECT_EQ(l.start_state(), 3u);
  for (StateIndex s = 3; s < 7; ++s) {
    EXPECT_EQ(l.cost(s, 1), 0.0);
    EXPECT_EQ(l.successors(s, 1)[0].state, s == 6 ? 0u : s + 1);
    EXPECT_FALSE(l.enabled(s, 0));
  }
  EXPECT_EQ(l.cost(0, 1), 1.0);
  EXPECT_EQ(l.successors(0, 1)[0].state, 0u);
  EXPECT_EQ(l.cost(0, 0), 1.0);
}

TEST(Lollypop, ChainShorterThanTraceIsRejected) {
  const BaseMdp m = chain_mdp(5);
  const std::size_t len = instrument_solver(m).length();
  EXPECT_THROW(construct_lollypop(m, len - 1), ContractViolation);
  EXPECT_NO_THROW(construct_lollypop(m, len));
  EXPECT_THROW(construct_lollypop(m, len, 0.0), ContractViolation);
}

TEST(Lollypop, OptimalMetareasoningRecoversTheBaseOptimum) {
  std::mt19937_64 rng(77);
  int checked = 0;
  while (checked < 25) {
    const BaseMdp m = random_ssp(rng);
    const std::size_t len = instrument_solver(m).length();
    if (len > 400) continue;  // slowly mixing draws make the product too large
    const int i = checked++;
    const BaseMdp l = construct_lollypop(m, len);
    const auto mm = construct_meta_mdp(l, instrument_solver(l));
    EXPECT_NEAR(solve_meta(mm).value[mm.product.start_state()], optimum_without_nop(m), 1e-6)
        << i;
  }
  const BaseMdp d = detour_mdp(3.0);
  const BaseMdp l = construct_lollypop(d, instrument_solver(d).length());
  const auto mm = construct_meta_mdp(l, instrument_solver(l));
  EXPECT_NEAR(solve_meta(mm).value[mm.product.start_state()], 5.0, 1e-6);
}

TEST(Gap, RatioArithmetic) {
  EXPECT_NEAR(gap_from_costs(1089, 103.9).mg_ub, 10.5, 0.05);
  EXPECT_NEAR(gap_from_costs(767.3, 68.1).mg_ub, 11.3, 0.05);
  EXPECT_NEAR(gap_from_costs(979, 113.5).mg_ub, 8.6, 0.05);
  EXPECT_NEAR(gap_from_costs(251.4, 66).mg_ub, 3.8, 0.05);
  EXPECT_NEAR(gap_from_costs(119.4, 66).mg_ub, 1.8, 0.05);
  EXPECT_TRUE(gap_from_costs(5, 2).defined);
}

TEST(Gap, UndefinedForZeroOptimumOrImproperHeuristic) {
  EXPECT_FALSE(gap_from_costs(4, 0).defined);
  EXPECT_TRUE(std::isnan(gap_from_costs(4, 0).mg_ub));
  EXPECT_FALSE(gap_from_costs(kInfinity, 3).defined);
}

TEST(Gap, HeuristicGreedyPolicyOnDetour) {
  const BaseMdp m = detour_mdp(1.0);
  const auto g = metareasoning_gap_ub(m, ValueFn{0, 0, 0});
  EXPECT_DOUBLE_EQ(g.heuristic_cost, 11.0);
  EXPECT_NEAR(g.optimal_cost, 5.0, 1e-9);
  EXPECT_NEAR(g.mg_ub, 2.2, 1e-9);
}
