#pragma once

#include "metareason/mdp.hpp"

#include <optional>
#include <unordered_map>
#include <vector>

namespace metareason {

/// A backup moved the upper bound up or the lower bound down by more than the
/// floating-point slack; the initial bounds were not monotone.
class MonotonicityError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/**
 * Paired lower/upper value bounds maintained by BRTDP. Together with the drop
 * history this stands in for the planner configuration.
 */
struct BoundsState {
  ValueFn lower;
  ValueFn upper;
  std::size_t trial_count = 0;
  std::vector<std::uint8_t> touched;

  /// Largest raw violation seen by any backup (upper increase, lower
  /// decrease), floored at 0. Only rounding noise under monotone bounds.
  double max_upper_increase = 0.0;
  double max_lower_decrease = 0.0;

  double gap(StateIndex s) const { return upper[s] - lower[s]; }
};

struct TrialOptions {
  std::size_t max_length = 50;
  bool check_monotone = true;
  /// Relative slack for the monotonicity assertion.
  double monotone_slack = 1e-9;
  /// Back up each state when the trial enters it, as well as on the way out.
  bool forward_backups = true;
};

/// Most recent per-(state, action) decrease of the upper-bound Q-value caused
/// by a thinking cycle. Only states snapshotted by some cycle have records.
class DropHistory {
 public:
  explicit DropHistory(std::size_t action_count) : actions_(action_count) {}

  bool has_record(StateIndex s) const { return drops_.contains(s); }

  std::optional<double> drop(StateIndex s, ActionIndex a) const {
    const auto it = drops_.find(s);
    if (it == drops_.end() || a >= actions_ || !it->second.known[a]) return std::nullopt;
    return it->second.value[a];
  }

  void record(StateIndex s, ActionIndex a, double drop) {
    if (drop < 0.0) throw ContractViolation("DropHistory: negative drop");
    auto& row = drops_[s];
    if (row.value.empty()) {
      row.value.assign(actions_, 0.0);
      row.known.assign(actions_, 0);
    }
    row.value[a] = drop;
    row.known[a] = 1;
  }

  std::size_t recorded_states() const { return drops_.size(); }

 private:
  struct Row {
    std::vector<double> value;
    std::vector<std::uint8_t> known;
  };
  std::size_t actions_;
  std::unordered_map<StateIndex, Row> drops_;
};

inline BoundsState init_planner(const BaseMdp& m, ValueFn lower, ValueFn upper) {
  const std::size_t n = m.state_count();
  if (lower.size() != n || upper.size() != n)
    throw ContractViolation("init_planner: bound size mismatch");
  for (StateIndex s = 0; s < n; ++s) {
    if (lower[s] > upper[s] + 1e-9)
      throw ContractViolation("init_planner: lower bound exceeds upper bound at state " +
                              std::to_string(s));
    if (m.is_goal(s) && (lower[s] != 0.0 || upper[s] != 0.0))
      throw ContractViolation("init_planner: bounds must be zero at the goal");
  }
  BoundsState b;
  b.lower = std::move(lower);
  b.upper = std::move(upper);
  b.touched.assign(n, 0);
  return b;
}

namespace detail {

inline void require_acting(const BaseMdp& m, StateIndex s, ActionIndex a, const char* who) {
  if (s >= m.state_count() || a >= m.action_count() || a == m.nop_action() || !m.enabled(s, a))
    throw ContractViolation(std::string(who) + ": action " + std::to_string(a) +
                            " is not an enabled acting action in state " + std::to_string(s));
}

inline double lookahead(const BaseMdp& m, const ValueFn& v, StateIndex s, ActionIndex a) {
  double q = m.cost(s, a);
  for (const auto& o : m.successors(s, a)) q += o.probability * v[o.state];
  return q;
}

/// argmin over enabled non-NOP actions; ties to the lowest index. Returns the
/// NOP index when s has no acting action.
inline ActionIndex greedy_acting(const BaseMdp& m, const ValueFn& v, StateIndex s,
                                 double* best_q = nullptr) {
  double best = kInfinity;
  ActionIndex best_a = m.nop_action();
  for (ActionIndex a = 0; a < m.action_count(); ++a) {
    if (a == m.nop_action() || !m.enabled(s, a)) continue;
    const double q = lookahead(m, v, s, a);
    if (q < best) {
      best = q;
      best_a = a;
    }
  }
  if (best_q) *best_q = best;
  return best_a;
}

inline void backup(BoundsState& b, const BaseMdp& m, StateIndex s, const TrialOptions& opt) {
  if (m.is_goal(s)) return;
  double up = 0.0, lo = 0.0;
  greedy_acting(m, b.upper, s, &up);
  greedy_acting(m, b.lower, s, &lo);
  const double up_excess = up - b.upper[s];
  const double lo_deficit = b.lower[s] - lo;
  b.max_upper_increase = std::max(b.max_upper_increase, up_excess);
  b.max_lower_decrease = std::max(b.max_lower_decrease, lo_deficit);
  if (opt.check_monotone) {
    const double slack_u = opt.monotone_slack * std::max(1.0, std::abs(b.upper[s]));
    const double slack_l = opt.monotone_slack * std::max(1.0, std::abs(b.lower[s]));
    if (up_excess > slack_u)
      throw MonotonicityError("upper bound increased at state " + std::to_string(s));
    if (lo_deficit > slack_l)
      throw MonotonicityError("lower bound decreased at state " + std::to_string(s));
  }
  b.upper[s] = std::min(b.upper[s], up);
  b.lower[s] = std::max(b.lower[s], lo);
  b.touched[s] = 1;
}

}  // namespace detail

inline double q_upper(const BoundsState& b, const BaseMdp& m, StateIndex s, ActionIndex a) {
  detail::require_acting(m, s, a, "q_upper");
  return detail::lookahead(m, b.upper, s, a);
}

inline double q_lower(const BoundsState& b, const BaseMdp& m, StateIndex s, ActionIndex a) {
  detail::require_acting(m, s, a, "q_lower");
  return detail::lookahead(m, b.lower, s, a);
}

/// The planner's recommendation: greedy on the upper bound over acting actions.
inline ActionIndex recommended_action(const BoundsState& b, const BaseMdp& m, StateIndex s) {
  return detail::greedy_acting(m, b.upper, s);
}

/**
 * One BRTDP trial from `start`.
 *
 * At each state: back up both bounds (unless forward_backups is off), take
 * the action greedy on the lower bound, and sample the successor with
 * probability proportional to T(s,a,s') * (upper(s') - lower(s')), uniformly
 * over the support when every gap is zero. Stops at the goal or after max_length steps, then backs up the
 * visited states in reverse order.
 */
inline void run_trial(BoundsState& b, const BaseMdp& m, StateIndex start, Rng& rng,
                      const TrialOptions& opt = {}) {
  std::vector<StateIndex> visited;
  visited.reserve(opt.max_length);
  StateIndex s = start;
  std::vector<double> weight;
  for (std::size_t step = 0; step < opt.max_length && !m.is_goal(s); ++step) {
    if (opt.forward_backups) detail::backup(b, m, s, opt);
    visited.push_back(s);
    const ActionIndex a = detail::greedy_acting(m, b.lower, s);
    if (a == m.nop_action()) break;
    const auto succ = m.successors(s, a);
    weight.resize(succ.size());
    double total = 0.0;
    for (std::size_t i = 0; i < succ.size(); ++i) {
      weight[i] = succ[i].probability * std::max(0.0, b.gap(succ[i].state));
      total += weight[i];
    }
    std::size_t pick = succ.size() - 1;
    if (total > 0.0) {
      double u = uniform01(rng) * total;
      for (std::size_t i = 0; i < succ.size(); ++i) {
        if (u < weight[i]) {
          pick = i;
          break;
        }
        u -= weight[i];
      }
    } else {
      pick = std::min(succ.size() - 1, static_cast<std::size_t>(uniform01(rng) * succ.size()));
    }
    s = succ[pick].state;
  }
  for (auto it = visited.rbegin(); it != visited.rend(); ++it) detail::backup(b, m, *it, opt);
  ++b.trial_count;
}

/// States whose Q-values a thinking cycle at s snapshots: s and its NOP
/// successors, excluding goals.
inline std::vector<StateIndex> cycle_watch_list(const BaseMdp& m, StateIndex s) {
  std::vector<StateIndex> watch;
  if (!m.is_goal(s)) watch.push_back(s);
  if (m.enabled(s, m.nop_action()))
    for (const auto& o : m.successors(s, m.nop_action()))
      if (!m.is_goal(o.state) && std::find(watch.begin(), watch.end(), o.state) == watch.end())
        watch.push_back(o.state);
  return watch;
}

/**
 * One thinking cycle: k BRTDP trials from the agent's state s. Records the
 * resulting upper-bound Q drop max(0, before - after) for every acting action
 * at s and at each NOP successor of s.
 */
inline void thinking_cycle(BoundsState& b, DropHistory& drops, const BaseMdp& m, StateIndex s,
                           std::size_t k_trials, Rng& rng, const TrialOptions& opt = {}) {
  if (k_trials == 0) throw ContractViolation("thinking_cycle: k_trials must be at least 1");
  const auto watch = cycle_watch_list(m, s);
  const std::size_t na = m.action_count();
  std::vector<double> before(watch.size() * na, kInfinity);
  for (std::size_t i = 0; i < watch.size(); ++i)
    for (ActionIndex a = 0; a < na; ++a)
      if (a != m.nop_action() && m.enabled(watch[i], a))
        before[i * na + a] = detail::lookahead(m, b.upper, watch[i], a);

  for (std::size_t t = 0; t < k_trials; ++t) run_trial(b, m, s, rng, opt);

  for (std::size_t i = 0; i < watch.size(); ++i)
    for (ActionIndex a = 0; a < na; ++a)
      if (a != m.nop_action() && m.enabled(watch[i], a)) {
        const double after = detail::lookahead(m, b.upper, watch[i], a);
        drops.record(watch[i], a, std::max(0.0, before[i * na + a] - after));
      }
}

}  // namespace metareason
