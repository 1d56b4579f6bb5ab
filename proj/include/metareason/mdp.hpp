#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace metareason {

using StateIndex = std::size_t;
using ActionIndex = std::size_t;
using Rng = std::mt19937_64;

/// Cost-to-go per state.
using ValueFn = std::vector<double>;
/// Action per state.
using Policy = std::vector<ActionIndex>;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Raised when an MDP refers to states or actions that do not exist, or carries
/// probabilities outside (0, 1].
class StructuralError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A caller broke a documented precondition.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Value iteration hit its sweep cap without reaching the residual tolerance.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A policy fails to reach the goal with probability one.
class ImproperPolicyError : public std::runtime_error {
 public:
  ImproperPolicyError(const std::string& what, StateIndex trapped)
      : std::runtime_error(what), trapped_state(trapped) {}
  StateIndex trapped_state;
};

/// Uniform double in [0, 1) built from the top 53 bits, so streams are
/// reproducible across standard library implementations.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

struct Outcome {
  StateIndex state;
  double probability;
};

/// Whether solvers and planners consider the designated NOP action.
enum class ActionSet { kAll, kExcludeNop };

/**
 * Tabular stochastic shortest path MDP with a designated NOP action.
 *
 * Transitions are stored sparsely (explicit support only) in a CSR layout
 * indexed by (state, action). An action is enabled in a state iff it has a
 * nonempty successor list. Goal states are absorbing; the builder fills in
 * zero-cost self-loops for any goal action left unspecified.
 *
 * Instances are immutable after construction and safe to share.
 */
class BaseMdp {
 public:
  BaseMdp() = default;

  std::size_t state_count() const { return state_count_; }
  std::size_t action_count() const { return action_count_; }
  ActionIndex nop_action() const { return nop_; }
  StateIndex start_state() const { return start_; }
  StateIndex goal_state() const { return goal_; }
  bool is_goal(StateIndex s) const { return goal_mask_[s] != 0; }

  std::span<const Outcome> successors(StateIndex s, ActionIndex a) const {
    const std::size_t k = key(s, a);
    return {outcomes_.data() + offsets_[k], offsets_[k + 1] - offsets_[k]};
  }
  double cost(StateIndex s, ActionIndex a) const { return costs_[key(s, a)]; }
  bool enabled(StateIndex s, ActionIndex a) const {
    const std::size_t k = key(s, a);
    return offsets_[k + 1] > offsets_[k];
  }
  bool considered(ActionSet set, ActionIndex a) const {
    return set == ActionSet::kAll || a != nop_;
  }

  /// Enabled actions of s in ascending index order.
  std::vector<ActionIndex> enabled_actions(StateIndex s,
                                           ActionSet set = ActionSet::kAll) const {
    std::vector<ActionIndex> out;
    for (ActionIndex a = 0; a < action_count_; ++a)
      if (considered(set, a) && enabled(s, a)) out.push_back(a);
    return out;
  }

 private:
  friend class MdpBuilder;
  std::size_t key(StateIndex s, ActionIndex a) const { return s * action_count_ + a; }

  std::size_t state_count_ = 0;
  std::size_t action_count_ = 0;
  ActionIndex nop_ = 0;
  StateIndex start_ = 0;
  StateIndex goal_ = 0;
  std::vector<std::uint8_t> goal_mask_;
  std::vector<std::size_t> offsets_;
  std::vector<Outcome> outcomes_;
  std::vector<double> costs_;
};

/// Accumulates transitions and costs, then freezes them into a BaseMdp.
/// Duplicate (s, a, s') entries are merged by summing probability.
class MdpBuilder {
 public:
  MdpBuilder(std::size_t states, std::size_t actions, ActionIndex nop,
             StateIndex start, StateIndex goal)
      : states_(states), actions_(actions), nop_(nop), start_(start), goal_(goal),
        rows_(states * actions), costs_(states * actions, 0.0),
        goal_mask_(states, 0) {
    std::vector<std::string> bad;
    if (states == 0) bad.push_back("state count must be positive");
    if (actions == 0) bad.push_back("action count must be positive");
    if (nop >= actions) bad.push_back("nop action " + std::to_string(nop) + " out of range");
    if (start >= states) bad.push_back("start state " + std::to_string(start) + " out of range");
    if (goal >= states) bad.push_back("goal state " + std::to_string(goal) + " out of range");
    fail_if(bad);
    goal_mask_[goal] = 1;
  }

  MdpBuilder& add_goal(StateIndex s) {
    if (s >= states_) throw StructuralError("goal state " + std::to_string(s) + " out of range");
    goal_mask_[s] = 1;
    return *this;
  }

  MdpBuilder& add_transition(StateIndex s, ActionIndex a, StateIndex next, double p) {
    std::vector<std::string> bad;
    if (s >= states_) bad.push_back("transition source " + std::to_string(s) + " out of range");
    if (a >= actions_) bad.push_back("transition action " + std::to_string(a) + " out of range");
    if (next >= states_) bad.push_back("transition target " + std::to_string(next) + " out of range");
    if (!(p > 0.0 && p <= 1.0))
      bad.push_back("transition probability " + std::to_string(p) + " outside (0, 1]");
    fail_if(bad);
    auto& row = rows_[s * actions_ + a];
    for (auto& o : row) {
      if (o.state == next) {
        o.probability += p;
        return *this;
      }
    }
    row.push_back({next, p});
    return *this;
  }

  MdpBuilder& set_cost(StateIndex s, ActionIndex a, double c) {
    std::vector<std::string> bad;
    if (s >= states_) bad.push_back("cost state " + std::to_string(s) + " out of range");
    if (a >= actions_) bad.push_back("cost action " + std::to_string(a) + " out of range");
    if (!std::isfinite(c)) bad.push_back("cost must be finite");
    fail_if(bad);
    costs_[s * actions_ + a] = c;
    return *this;
  }

  BaseMdp build() const {
    BaseMdp m;
    m.state_count_ = states_;
    m.action_count_ = actions_;
    m.nop_ = nop_;
    m.start_ = start_;
    m.goal_ = goal_;
    m.goal_mask_ = goal_mask_;
    m.costs_ = costs_;
    m.offsets_.assign(states_ * actions_ + 1, 0);
    std::size_t total = 0;
    for (StateIndex s = 0; s < states_; ++s) {
      for (ActionIndex a = 0; a < actions_; ++a) {
        const std::size_t k = s * actions_ + a;
        m.offsets_[k] = total;
        std::size_t n = rows_[k].size();
        if (n == 0 && goal_mask_[s]) n = 1;
        total += n;
      }
    }
    m.offsets_.back() = total;
    m.outcomes_.reserve(total);
    for (StateIndex s = 0; s < states_; ++s) {
      for (ActionIndex a = 0; a < actions_; ++a) {
        const auto& row = rows_[s * actions_ + a];
        if (row.empty() && goal_mask_[s]) {
          m.outcomes_.push_back({s, 1.0});
          m.costs_[s * actions_ + a] = 0.0;
        } else {
          m.outcomes_.insert(m.outcomes_.end(), row.begin(), row.end());
        }
      }
    }
    return m;
  }

 private:
  static void fail_if(const std::vector<std::string>& bad) {
    if (bad.empty()) return;
    std::string msg = "malformed MDP:";
    for (const auto& b : bad) msg += " [" + b + "]";
    throw StructuralError(msg);
  }

  std::size_t states_, actions_;
  ActionIndex nop_;
  StateIndex start_, goal_;
  std::vector<std::vector<Outcome>> rows_;
  std::vector<double> costs_;
  std::vector<std::uint8_t> goal_mask_;
};

struct ValidationReport {
  bool is_ssp = false;
  bool proper_policy_found = false;
  std::vector<std::string> messages;
};

namespace detail {

/// States from which some policy reaches a goal with probability one, using only
/// actions in `set`. Greatest fixed point of: keep states that can reach the goal
/// through actions whose whole support stays inside the kept set.
inline std::vector<std::uint8_t> almost_sure_reach(const BaseMdp& m, ActionSet set) {
  const std::size_t n = m.state_count();
  std::vector<std::uint8_t> keep(n, 1);
  for (;;) {
    // Least fixed point: backward reachability through "safe" actions.
    std::vector<std::uint8_t> reach(n, 0);
    for (StateIndex s = 0; s < n; ++s) reach[s] = m.is_goal(s) ? 1 : 0;
    bool grew = true;
    while (grew) {
      grew = false;
      for (StateIndex s = 0; s < n; ++s) {
        if (reach[s] || !keep[s]) continue;
        for (ActionIndex a = 0; a < m.action_count() && !reach[s]; ++a) {
          if (!m.considered(set, a) || !m.enabled(s, a)) continue;
          bool safe = true, hits = false;
          for (const auto& o : m.successors(s, a)) {
            if (!keep[o.state]) safe = false;
            if (reach[o.state]) hits = true;
          }
          if (safe && hits) {
            reach[s] = 1;
            grew = true;
          }
        }
      }
    }
    if (reach == keep) return keep;
    keep = std::move(reach);
  }
}

inline double bellman_min(const BaseMdp& m, std::span<const double> v, StateIndex s,
                          ActionSet set, ActionIndex* argmin = nullptr) {
  double best = kInfinity;
  ActionIndex best_a = m.nop_action();
  for (ActionIndex a = 0; a < m.action_count(); ++a) {
    if (!m.considered(set, a) || !m.enabled(s, a)) continue;
    double q = m.cost(s, a);
    for (const auto& o : m.successors(s, a)) q += o.probability * v[o.state];
    if (q < best) {
      best = q;
      best_a = a;
    }
  }
  if (argmin) *argmin = best_a;
  return best;
}

inline double max_residual(const BaseMdp& m, std::span<const double> v, ActionSet set) {
  double r = 0.0;
  for (StateIndex s = 0; s < m.state_count(); ++s) {
    if (m.is_goal(s)) continue;
    const double b = bellman_min(m, v, s, set);
    if (std::isinf(b) && std::isinf(v[s])) continue;
    r = std::max(r, std::abs(v[s] - b));
  }
  return r;
}

}  // namespace detail

/// Checks SSP validity: normalized transitions, absorbing zero-cost goal, and
/// existence of a complete proper policy.
inline ValidationReport validate_ssp(const BaseMdp& m, ActionSet set = ActionSet::kAll) {
  ValidationReport r;
  bool normalized = true, absorbing = true, actions_ok = true;
  for (StateIndex s = 0; s < m.state_count(); ++s) {
    bool any = false;
    for (ActionIndex a = 0; a < m.action_count(); ++a) {
      if (!m.enabled(s, a)) continue;
      if (m.considered(set, a)) any = true;
      double sum = 0.0;
      for (const auto& o : m.successors(s, a)) sum += o.probability;
      if (std::abs(sum - 1.0) > 1e-9) {
        normalized = false;
        std::ostringstream os;
        os << "probabilities of (" << s << ", " << a << ") sum to " << sum;
        r.messages.push_back(os.str());
      }
      if (m.cost(s, a) < 0.0) {
        normalized = false;
        std::ostringstream os;
        os << "negative cost at (" << s << ", " << a << ")";
        r.messages.push_back(os.str());
      }
      if (m.is_goal(s)) {
        const auto succ = m.successors(s, a);
        if (succ.size() != 1 || succ[0].state != s || m.cost(s, a) != 0.0) {
          absorbing = false;
          std::ostringstream os;
          os << "goal state " << s << " is not absorbing at zero cost under action " << a;
          r.messages.push_back(os.str());
        }
      }
    }
    if (!any && !m.is_goal(s)) {
      actions_ok = false;
      r.messages.push_back("state " + std::to_string(s) + " has no enabled action");
    }
  }
  const auto reach = detail::almost_sure_reach(m, set);
  r.proper_policy_found = std::all_of(reach.begin(), reach.end(), [](auto x) { return x != 0; });
  if (!r.proper_policy_found) {
    for (StateIndex s = 0; s < m.state_count(); ++s)
      if (!reach[s])
        r.messages.push_back("goal not reachable with probability 1 from state " +
                             std::to_string(s));
  }
  r.is_ssp = normalized && absorbing && actions_ok && r.proper_policy_found;
  return r;
}

/// C(s,a) + sum_s' T(s,a,s') v(s').
inline double q_value(const BaseMdp& m, std::span<const double> v, StateIndex s, ActionIndex a) {
  if (s >= m.state_count() || a >= m.action_count() || !m.enabled(s, a))
    throw ContractViolation("q_value: action " + std::to_string(a) + " not enabled in state " +
                            std::to_string(s));
  double q = m.cost(s, a);
  for (const auto& o : m.successors(s, a)) q += o.probability * v[o.state];
  return q;
}

/// Greedy policy w.r.t. v; ties go to the lowest action index. Goal states map
/// to their lowest enabled action.
inline Policy greedy_policy(const BaseMdp& m, std::span<const double> v,
                            ActionSet set = ActionSet::kAll) {
  Policy pi(m.state_count(), m.nop_action());
  for (StateIndex s = 0; s < m.state_count(); ++s) {
    if (m.is_goal(s)) {
      for (ActionIndex a = 0; a < m.action_count(); ++a)
        if (m.enabled(s, a) && m.considered(set, a)) {
          pi[s] = a;
          break;
        }
      continue;
    }
    ActionIndex a = m.nop_action();
    detail::bellman_min(m, v, s, set, &a);
    pi[s] = a;
  }
  return pi;
}

/// States that reach a goal with probability one when following pi.
inline std::vector<std::uint8_t> proper_states(const BaseMdp& m, const Policy& pi) {
  const std::size_t n = m.state_count();
  std::vector<std::uint8_t> keep(n, 1);
  for (;;) {
    std::vector<std::uint8_t> reach(n, 0);
    for (StateIndex s = 0; s < n; ++s) reach[s] = m.is_goal(s) ? 1 : 0;
    bool grew = true;
    while (grew) {
      grew = false;
      for (StateIndex s = 0; s < n; ++s) {
        if (reach[s] || !keep[s] || !m.enabled(s, pi[s])) continue;
        bool safe = true, hits = false;
        for (const auto& o : m.successors(s, pi[s])) {
          if (!keep[o.state]) safe = false;
          if (reach[o.state]) hits = true;
        }
        if (safe && hits) {
          reach[s] = 1;
          grew = true;
        }
      }
    }
    if (reach == keep) return keep;
    keep = std::move(reach);
  }
}

/// Exact value of policy pi. States from which pi is improper get +infinity.
/// Throws ImproperPolicyError if pi is improper from the start state.
inline ValueFn policy_evaluation(const BaseMdp& m, const Policy& pi, double tolerance = 1e-9) {
  const std::size_t n = m.state_count();
  if (pi.size() != n) throw ContractViolation("policy_evaluation: policy size mismatch");
  for (StateIndex s = 0; s < n; ++s)
    if (!m.is_goal(s) && !m.enabled(s, pi[s]))
      throw ContractViolation("policy_evaluation: action " + std::to_string(pi[s]) +
                              " not enabled in state " + std::to_string(s));
  const auto ok = proper_states(m, pi);
  if (!ok[m.start_state()]) {
    // Name a reachable state that cannot reach the goal.
    std::vector<std::uint8_t> seen(n, 0);
    std::vector<StateIndex> stack{m.start_state()};
    seen[m.start_state()] = 1;
    StateIndex trapped = m.start_state();
    while (!stack.empty()) {
      const StateIndex s = stack.back();
      stack.pop_back();
      if (!m.is_goal(s) && !m.enabled(s, pi[s])) continue;
      bool closed = !m.is_goal(s);
      for (const auto& o : m.successors(s, pi[s])) {
        if (ok[o.state]) closed = false;
        if (!seen[o.state]) {
          seen[o.state] = 1;
          stack.push_back(o.state);
        }
      }
      if (closed && !ok[s]) trapped = s;
    }
    throw ImproperPolicyError("policy is improper from the start state; trapped at state " +
                                  std::to_string(trapped),
                              trapped);
  }

  // Solve (I - P) v = c over proper non-goal states.
  std::vector<std::ptrdiff_t> index(n, -1);
  std::ptrdiff_t count = 0;
  for (StateIndex s = 0; s < n; ++s)
    if (ok[s] && !m.is_goal(s)) index[s] = count++;

  ValueFn v(n, kInfinity);
  for (StateIndex s = 0; s < n; ++s)
    if (m.is_goal(s)) v[s] = 0.0;
  if (count > 0) {
    std::vector<Eigen::Triplet<double>> triplets;
    Eigen::VectorXd rhs(count);
    for (StateIndex s = 0; s < n; ++s) {
      const auto row = index[s];
      if (row < 0) continue;
      triplets.emplace_back(row, row, 1.0);
      rhs[row] = m.cost(s, pi[s]);
      for (const auto& o : m.successors(s, pi[s]))
        if (index[o.state] >= 0) triplets.emplace_back(row, index[o.state], -o.probability);
    }
    Eigen::SparseMatrix<double> a(count, count);
    a.setFromTriplets(triplets.begin(), triplets.end());
    a.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success)
      throw DivergenceError("policy_evaluation: singular policy system");
    const Eigen::VectorXd x = lu.solve(rhs);
    for (StateIndex s = 0; s < n; ++s)
      if (index[s] >= 0) v[s] = x[index[s]];
  }

  // Polish with a few Gauss-Seidel sweeps of the policy operator.
  for (int sweep = 0; sweep < 1000; ++sweep) {
    double change = 0.0;
    for (StateIndex s = 0; s < n; ++s) {
      if (index[s] < 0) continue;
      double q = m.cost(s, pi[s]);
      for (const auto& o : m.successors(s, pi[s])) q += o.probability * v[o.state];
      change = std::max(change, std::abs(q - v[s]));
      v[s] = q;
    }
    if (change <= tolerance * 1e-3) break;
  }
  return v;
}

struct SolveOptions {
  double tolerance = 1e-9;
  std::size_t max_sweeps = 1'000'000;
  ActionSet actions = ActionSet::kAll;
  /// Starting values; zero when absent.
  std::optional<ValueFn> initial;
};

struct Solution {
  ValueFn value;
  Policy policy;
  std::size_t sweeps = 0;
};

/**
 * Value iteration for SSP MDPs.
 *
 * Gauss-Seidel sweeps until the Bellman residual is within tolerance, then the
 * greedy policy is evaluated exactly; its value replaces the iterate when it is
 * itself a tolerance-level fixed point (this removes the slow geometric tail).
 * Ties in the greedy policy go to the lowest action index.
 */
inline Solution value_iteration(const BaseMdp& m, const SolveOptions& opt = {}) {
  const std::size_t n = m.state_count();
  ValueFn v = opt.initial.value_or(ValueFn(n, 0.0));
  if (v.size() != n) throw ContractViolation("value_iteration: initial values size mismatch");
  for (StateIndex s = 0; s < n; ++s)
    if (m.is_goal(s)) v[s] = 0.0;

  Solution out;
  for (;;) {
    if (out.sweeps >= opt.max_sweeps)
      throw DivergenceError("value_iteration: no convergence after " +
                            std::to_string(opt.max_sweeps) + " sweeps");
    double change = 0.0;
    for (StateIndex s = 0; s < n; ++s) {
      if (m.is_goal(s)) continue;
      const double b = detail::bellman_min(m, v, s, opt.actions);
      if (std::isinf(b) && std::isinf(v[s])) continue;
      change = std::max(change, std::abs(b - v[s]));
      v[s] = b;
    }
    ++out.sweeps;
    if (change <= opt.tolerance && detail::max_residual(m, v, opt.actions) <= opt.tolerance) break;
  }

  Policy pi = greedy_policy(m, v, opt.actions);
  const auto ok = proper_states(m, pi);
  if (std::all_of(ok.begin(), ok.end(), [](auto x) { return x != 0; })) {
    ValueFn exact = policy_evaluation(m, pi, opt.tolerance);
    if (detail::max_residual(m, exact, opt.actions) <= opt.tolerance) {
      v = std::move(exact);
      pi = greedy_policy(m, v, opt.actions);
    }
  }
  out.value = std::move(v);
  out.policy = std::move(pi);
  return out;
}

/// Draws a successor of (s, a).
inline StateIndex sample_transition(const BaseMdp& m, StateIndex s, ActionIndex a, Rng& rng) {
  if (!m.enabled(s, a))
    throw ContractViolation("sample_transition: action " + std::to_string(a) +
                            " not enabled in state " + std::to_string(s));
  const auto succ = m.successors(s, a);
  if (succ.size() == 1) return succ[0].state;
  double u = uniform01(rng);
  for (const auto& o : succ) {
    if (u < o.probability) return o.state;
    u -= o.probability;
  }
  return succ.back().state;
}

}  // namespace metareason
