#pragma once

#include "metareason/mdp.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace metareason {

/// Product of |S| and the trace length exceeded the configured cap.
class SizeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/**
 * Recorded run of a deterministic solver: value iteration whose configuration
 * is the value-function snapshot, mapped to actions by f(s, chi) = greedy
 * acting action (NOP only where nothing else is enabled).
 */
struct SolverTrace {
  std::vector<ValueFn> values;
  std::vector<Policy> policies;
  std::size_t granularity = 1;

  std::size_t length() const { return values.size(); }
};

struct InstrumentOptions {
  std::size_t granularity = 1;  // sweeps per recorded configuration
  double tolerance = 1e-9;
  std::size_t size_cap = 1'000'000;  // |S| * trace length
  std::optional<ValueFn> initial;
};

namespace detail {

/// Bellman minimum over acting actions, falling back to NOP when s has none.
inline double acting_min(const BaseMdp& m, std::span<const double> v, StateIndex s,
                         ActionIndex* argmin = nullptr) {
  ActionIndex a = m.nop_action();
  double best = bellman_min(m, v, s, ActionSet::kExcludeNop, &a);
  if (std::isinf(best) && m.enabled(s, m.nop_action())) {
    a = m.nop_action();
    best = bellman_min(m, v, s, ActionSet::kAll, nullptr);
  }
  if (argmin) *argmin = a;
  return best;
}

inline Policy acting_policy(const BaseMdp& m, std::span<const double> v) {
  Policy pi(m.state_count(), m.nop_action());
  for (StateIndex s = 0; s < m.state_count(); ++s) {
    ActionIndex a = m.nop_action();
    acting_min(m, v, s, &a);
    pi[s] = a;
  }
  return pi;
}

}  // namespace detail

/**
 * Runs synchronous (Jacobi) value iteration from zero (or opt.initial),
 * recording a configuration every `granularity` sweeps whenever the values
 * moved by at least the tolerance since the last record. Stops once a sweep
 * changes nothing beyond the tolerance.
 */
inline SolverTrace instrument_solver(const BaseMdp& m, const InstrumentOptions& opt = {}) {
  if (opt.granularity == 0) throw ContractViolation("instrument_solver: granularity must be >= 1");
  const std::size_t n = m.state_count();
  ValueFn v = opt.initial.value_or(ValueFn(n, 0.0));
  if (v.size() != n) throw ContractViolation("instrument_solver: initial size mismatch");
  for (StateIndex s = 0; s < n; ++s)
    if (m.is_goal(s)) v[s] = 0.0;

  SolverTrace trace;
  trace.granularity = opt.granularity;
  auto record = [&](const ValueFn& values) {
    if (n * (trace.length() + 1) > opt.size_cap)
      throw SizeError("instrument_solver: |S| x trace length exceeds cap " +
                      std::to_string(opt.size_cap) + "; raise the cap");
    trace.values.push_back(values);
    trace.policies.push_back(detail::acting_policy(m, values));
  };
  record(v);

  ValueFn next(n, 0.0);
  bool converged = false;
  std::size_t sweeps = 0;
  while (!converged) {
    for (std::size_t g = 0; g < opt.granularity; ++g) {
      double change = 0.0;
      for (StateIndex s = 0; s < n; ++s) {
        if (m.is_goal(s)) {
          next[s] = 0.0;
          continue;
        }
        next[s] = detail::acting_min(m, v, s);
        if (!(std::isinf(next[s]) && std::isinf(v[s])))
          change = std::max(change, std::abs(next[s] - v[s]));
      }
      std::swap(v, next);
      if (++sweeps > 10'000'000)
        throw DivergenceError("instrument_solver: value iteration does not converge");
      if (change < opt.tolerance) {
        converged = true;
        break;
      }
    }
    double moved = 0.0;
    for (StateIndex s = 0; s < n; ++s) {
      const double a = v[s], b = trace.values.back()[s];
      if (!(std::isinf(a) && std::isinf(b))) moved = std::max(moved, std::abs(a - b));
    }
    if (moved >= opt.tolerance) record(v);
  }
  return trace;
}

/// Meta_B(M): states (s, i) for base state s and configuration index i.
struct MetaMdp {
  BaseMdp product;
  std::size_t base_states = 0;
  std::size_t configurations = 0;

  StateIndex encode(StateIndex s, std::size_t config) const { return config * base_states + s; }
  StateIndex base_state(StateIndex meta) const { return meta % base_states; }
  std::size_t configuration(StateIndex meta) const { return meta / base_states; }
};

/**
 * Builds the product MDP. NOP moves the world by T(s, NOP, .) and the solver
 * one configuration forward (the last configuration loops on itself); the only
 * other enabled action is f(s, chi), which leaves the configuration unchanged.
 * Costs copy the base (s, a) costs.
 */
inline MetaMdp construct_meta_mdp(const BaseMdp& m, const SolverTrace& trace) {
  const std::size_t n = m.state_count();
  const std::size_t k = trace.length();
  if (k == 0 || trace.policies.size() != k) throw ContractViolation("construct_meta_mdp: empty trace");
  for (std::size_t i = 0; i < k; ++i)
    if (trace.values[i].size() != n || trace.policies[i].size() != n)
      throw ContractViolation("construct_meta_mdp: trace does not match the MDP");

  MetaMdp mm;
  mm.base_states = n;
  mm.configurations = k;
  const ActionIndex nop = m.nop_action();
  MdpBuilder b(n * k, m.action_count(), nop, mm.encode(m.start_state(), 0),
               mm.encode(m.goal_state(), 0));
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t next = std::min(i + 1, k - 1);
    for (StateIndex s = 0; s < n; ++s) {
      const StateIndex here = mm.encode(s, i);
      if (m.is_goal(s)) {
        b.add_goal(here);
        continue;
      }
      if (m.enabled(s, nop)) {
        for (const auto& o : m.successors(s, nop))
          b.add_transition(here, nop, mm.encode(o.state, next), o.probability);
        b.set_cost(here, nop, m.cost(s, nop));
      }
      const ActionIndex f = trace.policies[i][s];
      if (f != nop && m.enabled(s, f)) {
        for (const auto& o : m.successors(s, f))
          b.add_transition(here, f, mm.encode(o.state, i), o.probability);
        b.set_cost(here, f, m.cost(s, f));
      }
    }
  }
  mm.product = b.build();
  return mm;
}

/**
 * Optimal meta value and policy. Value iteration starts from the value of the
 * "think until the solver halts, then act" policy, an upper bound that keeps
 * zero-cost thinking loops from pinning the iterate at zero.
 */
inline Solution solve_meta(const MetaMdp& mm, double tolerance = 1e-9) {
  const BaseMdp& p = mm.product;
  const ActionIndex nop = p.nop_action();
  Policy think_then_act(p.state_count(), nop);
  for (StateIndex x = 0; x < p.state_count(); ++x) {
    if (p.is_goal(x)) continue;
    const bool last = mm.configuration(x) + 1 == mm.configurations;
    ActionIndex act = nop;
    for (ActionIndex a = 0; a < p.action_count(); ++a)
      if (a != nop && p.enabled(x, a)) act = a;
    think_then_act[x] = (!last && p.enabled(x, nop)) || act == nop ? nop : act;
  }
  SolveOptions opt;
  opt.tolerance = tolerance;
  const auto ok = proper_states(p, think_then_act);
  if (std::all_of(ok.begin(), ok.end(), [](auto v) { return v != 0; }))
    opt.initial = policy_evaluation(p, think_then_act, tolerance);
  return value_iteration(p, opt);
}

/**
 * Prepends a zero-cost NOP chain s'_0 -> ... -> s'_L -> s0 to m and gives every
 * original state a self-loop NOP of positive cost. New states are appended
 * after the original ones; the new start is s'_0.
 */
inline BaseMdp construct_lollypop(const BaseMdp& m, std::size_t chain_len,
                                  double nop_self_cost = 1.0) {
  if (!(nop_self_cost > 0.0)) throw ContractViolation("construct_lollypop: NOP cost must be positive");
  const std::size_t needed = instrument_solver(m).length();
  if (chain_len < needed)
    throw ContractViolation("construct_lollypop: chain length " + std::to_string(chain_len) +
                            " is below the solver trace length " + std::to_string(needed));
  const std::size_t n = m.state_count();
  const ActionIndex nop = m.nop_action();
  const StateIndex first = n;
  MdpBuilder b(n + chain_len + 1, m.action_count(), nop, first, m.goal_state());
  for (StateIndex s = 0; s < n; ++s) {
    if (m.is_goal(s)) {
      if (s != m.goal_state()) b.add_goal(s);
      continue;
    }
    for (ActionIndex a = 0; a < m.action_count(); ++a) {
      if (a == nop || !m.enabled(s, a)) continue;
      for (const auto& o : m.successors(s, a)) b.add_transition(s, a, o.state, o.probability);
      b.set_cost(s, a, m.cost(s, a));
    }
    b.add_transition(s, nop, s, 1.0);
    b.set_cost(s, nop, nop_self_cost);
  }
  for (std::size_t i = 0; i <= chain_len; ++i) {
    const StateIndex here = first + i;
    const StateIndex next = i == chain_len ? m.start_state() : here + 1;
    b.add_transition(here, nop, next, 1.0);
    b.set_cost(here, nop, 0.0);
  }
  return b.build();
}

/// Upper bound on the metareasoning gap: Heuristic cost / OptimalBase cost.
struct GapReport {
  double heuristic_cost = 0.0;
  double optimal_cost = 0.0;
  double mg_ub = std::numeric_limits<double>::quiet_NaN();
  bool defined = false;
};

inline GapReport gap_from_costs(double heuristic_cost, double optimal_cost) {
  GapReport g;
  g.heuristic_cost = heuristic_cost;
  g.optimal_cost = optimal_cost;
  g.defined = std::isfinite(heuristic_cost) && optimal_cost > 0.0;
  if (g.defined) g.mg_ub = heuristic_cost / optimal_cost;
  return g;
}

/**
 * Evaluates the policy greedy on `heuristic_upper` and the optimal policy at
 * the start state, both over `actions`. An improper heuristic policy yields an
 * infinite heuristic cost and an undefined ratio.
 */
inline GapReport metareasoning_gap_ub(const BaseMdp& m, const ValueFn& heuristic_upper,
                                      ActionSet actions = ActionSet::kExcludeNop) {
  const Policy pi = greedy_policy(m, heuristic_upper, actions);
  double heuristic_cost = kInfinity;
  try {
    heuristic_cost = policy_evaluation(m, pi)[m.start_state()];
  } catch (const ImproperPolicyError&) {
  }
  SolveOptions opt;
  opt.actions = actions;
  const double optimal = value_iteration(m, opt).value[m.start_state()];
  return gap_from_costs(heuristic_cost, optimal);
}

/// Cost of following a fixed policy with known value from the start.
inline double schedule_cost(const BaseMdp& m, const Policy& pi) {
  try {
    return policy_evaluation(m, pi)[m.start_state()];
  } catch (const ImproperPolicyError&) {
    return kInfinity;
  }
}

}  // namespace metareason
