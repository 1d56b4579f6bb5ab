#pragma once

#include "metareason/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace testing_support {

using namespace metareason;

struct RandomSspOptions {
  std::size_t min_states = 2;
  std::size_t max_states = 8;
  std::size_t min_actions = 1;  // acting actions, NOP comes on top
  std::size_t max_actions = 3;
  std::size_t max_support = 3;
  double min_cost = 0.5;
  double max_cost = 5.0;
};

/**
 * Random SSP MDP: states 0..n-1, start 0, goal n-1. Action 0 of state s always
 * has s+1 in its support, so walking on action 0 is proper. The NOP (last
 * action) is a self-loop with positive cost.
 */
inline BaseMdp random_ssp(std::mt19937_64& rng, const RandomSspOptions& o = {}) {
  std::uniform_int_distribution<std::size_t> ns(o.min_states, o.max_states);
  std::uniform_int_distribution<std::size_t> na(o.min_actions, o.max_actions);
  std::uniform_real_distribution<double> cost(o.min_cost, o.max_cost);
  std::uniform_real_distribution<double> weight(0.1, 1.0);
  const std::size_t n = ns(rng);
  const std::size_t acting = na(rng);
  const ActionIndex nop = acting;
  MdpBuilder b(n, acting + 1, nop, 0, n - 1);
  std::uniform_int_distribution<std::size_t> any_state(0, n - 1);
  std::uniform_int_distribution<std::size_t> support(1, o.max_support);
  for (StateIndex s = 0; s + 1 < n; ++s) {
    for (ActionIndex a = 0; a < acting; ++a) {
      std::vector<StateIndex> succ;
      if (a == 0) succ.push_back(s + 1);
      const std::size_t k = std::min(support(rng), n);
      while (succ.size() < k) {
        const StateIndex t = any_state(rng);
        if (std::find(succ.begin(), succ.end(), t) == succ.end()) succ.push_back(t);
      }
      std::vector<double> w(succ.size());
      double total = 0.0;
      for (auto& x : w) total += (x = weight(rng));
      for (std::size_t i = 0; i < succ.size(); ++i) b.add_transition(s, a, succ[i], w[i] / total);
      b.set_cost(s, a, cost(rng));
    }
    b.add_transition(s, nop, s, 1.0);
    b.set_cost(s, nop, cost(rng));
  }
  return b.build();
}

/// s0 -> s1 -> ... -> goal, one acting action of cost 1 plus a NOP self-loop
/// of cost `nop_cost`.
inline BaseMdp chain_mdp(std::size_t states, double nop_cost = 1.0) {
  MdpBuilder b(states, 2, 1, 0, states - 1);
  for (StateIndex s = 0; s + 1 < states; ++s) {
    b.add_transition(s, 0, s + 1, 1.0);
    b.set_cost(s, 0, 1.0);
    b.add_transition(s, 1, s, 1.0);
    b.set_cost(s, 1, nop_cost);
  }
  return b.build();
}

/// One state that reaches the goal with probability 0.5 per attempt at cost 1.
/// V*(0) = 2.
inline BaseMdp coin_mdp() {
  MdpBuilder b(2, 2, 1, 0, 1);
  b.add_transition(0, 0, 1, 0.5);
  b.add_transition(0, 0, 0, 0.5);
  b.set_cost(0, 0, 1.0);
  b.add_transition(0, 1, 0, 1.0);
  b.set_cost(0, 1, 1.0);
  return b.build();
}

/// State 0 with acting actions 0..k-1 straight to the goal (state 1) at the
/// given costs and a stay-in-place NOP.
inline BaseMdp star_mdp(const std::vector<double>& costs, double nop_cost) {
  const ActionIndex nop = costs.size();
  MdpBuilder b(2, costs.size() + 1, nop, 0, 1);
  for (ActionIndex a = 0; a < costs.size(); ++a) {
    b.add_transition(0, a, 1, 1.0);
    b.set_cost(0, a, costs[a]);
  }
  b.add_transition(0, nop, 0, 1.0);
  b.set_cost(0, nop, nop_cost);
  return b.build();
}

/// Independent oracle: policy value by plain Jacobi iteration.
inline std::vector<double> jacobi_policy_value(const BaseMdp& m, const Policy& pi,
                                               std::size_t sweeps = 200000) {
  std::vector<double> v(m.state_count(), 0.0), next(m.state_count(), 0.0);
  for (std::size_t it = 0; it < sweeps; ++it) {
    double change = 0.0;
    for (StateIndex s = 0; s < m.state_count(); ++s) {
      if (m.is_goal(s)) {
        next[s] = 0.0;
        continue;
      }
      double q = m.cost(s, pi[s]);
      for (const auto& o : m.successors(s, pi[s])) q += o.probability * v[o.state];
      next[s] = q;
      change = std::max(change, std::abs(q - v[s]));
    }
    v.swap(next);
    if (change < 1e-12) break;
  }
  return v;
}

/// Brute-force optimum at the start state over every deterministic policy
/// restricted to the listed actions; improper policies are skipped via a
/// reachability test.
inline double brute_force_optimum(const BaseMdp& m, bool include_nop) {
  const std::size_t n = m.state_count();
  std::vector<std::vector<ActionIndex>> choices(n);
  for (StateIndex s = 0; s < n; ++s) {
    for (ActionIndex a = 0; a < m.action_count(); ++a)
      if (m.enabled(s, a) && (include_nop || a != m.nop_action())) choices[s].push_back(a);
    if (choices[s].empty()) choices[s].push_back(m.nop_action());
  }
  std::vector<std::size_t> idx(n, 0);
  double best = kInfinity;
  for (;;) {
    Policy pi(n);
    for (StateIndex s = 0; s < n; ++s) pi[s] = choices[s][idx[s]];
    // Proper from the start: every state reachable from s0 can reach a goal.
    std::vector<int> reach_goal(n, 0);
    for (StateIndex s = 0; s < n; ++s) reach_goal[s] = m.is_goal(s);
    for (bool grew = true; grew;) {
      grew = false;
      for (StateIndex s = 0; s < n; ++s) {
        if (reach_goal[s]) continue;
        for (const auto& o : m.successors(s, pi[s]))
          if (reach_goal[o.state]) {
            reach_goal[s] = 1;
            grew = true;
            break;
          }
      }
    }
    std::vector<int> seen(n, 0);
    std::vector<StateIndex> stack{m.start_state()};
    seen[m.start_state()] = 1;
    bool proper = true;
    while (!stack.empty()) {
      const StateIndex s = stack.back();
      stack.pop_back();
      if (!reach_goal[s]) proper = false;
      if (m.is_goal(s)) continue;
      for (const auto& o : m.successors(s, pi[s]))
        if (!seen[o.state]) {
          seen[o.state] = 1;
          stack.push_back(o.state);
        }
    }
    if (proper) best = std::min(best, jacobi_policy_value(m, pi)[m.start_state()]);
    std::size_t k = 0;
    while (k < n && ++idx[k] == choices[k].size()) idx[k++] = 0;
    if (k == n) break;
  }
  return best;
}

}  // namespace testing_support
