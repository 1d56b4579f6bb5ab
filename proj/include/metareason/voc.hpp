#pragma once

#include "metareason/brtdp.hpp"

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace metareason {

/// Projected range of an action's next upper-bound Q-value: [hi - drop, hi].
struct Segment {
  ActionIndex action = 0;
  double hi = 0.0;
  double drop = 0.0;

  double lo() const { return hi - drop; }
  double mid() const { return hi - 0.5 * drop; }
};

struct ActionEstimate {
  ActionIndex action = 0;
  double probability = 0.0;  // P(action is recommended after one more cycle)
  double expectation = 0.0;  // E[its projected Q | it is recommended]
};

/// Per-action recommendation probabilities and conditional expectations, in
/// the order of the input segments.
struct RecommendEstimate {
  std::vector<ActionEstimate> actions;

  /// sum_a P(a) * E[Q_a | a]
  double expected_value() const {
    double v = 0.0;
    for (const auto& a : actions)
      if (a.probability > 0.0) v += a.probability * a.expectation;
    return v;
  }
};

enum class DropModel { kUncorrelated, kCorrelated };

namespace detail {

inline void check_segments(std::span<const Segment> segs, const char* who) {
  if (segs.empty()) throw ContractViolation(std::string(who) + ": no segments");
  if (segs.size() > 2)
    throw ContractViolation(std::string(who) + ": at most two segments are supported");
  for (const auto& s : segs)
    if (!(s.drop >= 0.0) || !std::isfinite(s.hi))
      throw ContractViolation(std::string(who) + ": segment needs finite hi and drop >= 0");
}

inline double clamp_to(const Segment& s, double x) { return std::clamp(x, s.lo(), s.hi); }

/// P(X < Y) and E[X ; X < Y] for independent X ~ U[x.lo, x.hi], Y ~ U[y.lo,
/// y.hi], where zero-width segments are point masses. Point-mass ties go to X
/// iff x_wins_ties. Integrals are taken in coordinates shifted to x.lo.
struct WinMass {
  double probability;
  double first_moment;
};

inline WinMass win_mass(const Segment& x, const Segment& y, bool x_wins_ties) {
  const double xw = x.drop, yw = y.drop;
  if (xw == 0.0 && yw == 0.0) {
    const bool wins = x.hi < y.hi || (x.hi == y.hi && x_wins_ties);
    return {wins ? 1.0 : 0.0, wins ? x.hi : 0.0};
  }
  if (xw == 0.0) {
    // P(Y > c) with c = x.hi.
    const double c = x.hi;
    const double p = std::clamp((y.hi - c) / yw, 0.0, 1.0);
    return {p, p * c};
  }
  const double r = x.lo();
  const double a0 = 0.0, a1 = xw;  // x support, shifted
  if (yw == 0.0) {
    // P(X < c) = (m - lo) / w, E[X ; X < c] = int_lo^m x / w dx.
    const double m = std::clamp(y.hi - r, a0, a1);
    const double p = m / xw;
    return {p, p * r + (m * m) / (2.0 * xw)};
  }
  const double ylo = y.lo() - r, yhi = y.hi - r;
  double p = 0.0, moment = 0.0;  // moment in shifted coordinates
  // Piece where Y surely exceeds x: [a0, min(a1, ylo)].
  {
    const double lo = a0, hi = std::min(a1, ylo);
    if (hi > lo) {
      p += (hi - lo) / xw;
      moment += (hi * hi - lo * lo) / (2.0 * xw);
    }
  }
  // Overlap [max(a0, ylo), min(a1, yhi)]: survival of Y is (yhi - x) / yw.
  {
    const double lo = std::max(a0, ylo), hi = std::min(a1, yhi);
    if (hi > lo) {
      const double d1 = hi - lo;
      const double d2 = (hi * hi - lo * lo) / 2.0;
      const double d3 = (hi * hi * hi - lo * lo * lo) / 3.0;
      p += (yhi * d1 - d2) / (xw * yw);
      moment += (yhi * d2 - d3) / (xw * yw);
    }
  }
  return {p, p * r + moment};
}

inline ActionEstimate finish(const Segment& s, double p, double first_moment) {
  ActionEstimate e;
  e.action = s.action;
  e.probability = std::clamp(p, 0.0, 1.0);
  e.expectation = e.probability > 0.0 ? clamp_to(s, first_moment / p) : s.mid();
  return e;
}

}  // namespace detail

/**
 * Independent-drop model: each action's next bound is uniform on its segment.
 * Returns P(action's draw is the smallest) and its conditional mean. Closed
 * form piecewise-polynomial integration; zero-width segments are point masses
 * whose ties go to the lower action index.
 */
inline RecommendEstimate estimate_uncorrelated(std::span<const Segment> segs) {
  detail::check_segments(segs, "estimate_uncorrelated");
  RecommendEstimate out;
  if (segs.size() == 1) {
    out.actions.push_back({segs[0].action, 1.0, segs[0].mid()});
    return out;
  }
  const Segment& a = segs[0];
  const Segment& b = segs[1];
  const bool a_first = a.action < b.action;
  const auto wa = detail::win_mass(a, b, a_first);
  const auto wb = detail::win_mass(b, a, !a_first);
  // The two masses are complementary; renormalize away rounding.
  const double total = wa.probability + wb.probability;
  out.actions.push_back(detail::finish(a, wa.probability / total, wa.first_moment / total));
  out.actions.push_back(detail::finish(b, wb.probability / total, wb.first_moment / total));
  return out;
}

/**
 * Perfectly correlated model: a single rho ~ U[0, 1] scales every drop, so
 * action a's next bound is the line l_a(rho) = hi_a - rho * drop_a. P(a) is
 * the measure of rho where l_a is strictly lowest and E is the mean of l_a
 * there. Identical lines give all mass to the lower action index.
 */
inline RecommendEstimate estimate_correlated(std::span<const Segment> segs) {
  detail::check_segments(segs, "estimate_correlated");
  RecommendEstimate out;
  if (segs.size() == 1) {
    out.actions.push_back({segs[0].action, 1.0, segs[0].mid()});
    return out;
  }
  const Segment& a = segs[0];
  const Segment& b = segs[1];
  // l_a - l_b = offset - slope * rho
  const double offset = a.hi - b.hi;
  const double slope = a.drop - b.drop;
  double a_from = 0.0, a_to = 0.0;  // rho interval where a is lowest
  if (slope == 0.0) {
    const bool a_wins = offset < 0.0 || (offset == 0.0 && a.action < b.action);
    a_to = a_wins ? 1.0 : 0.0;
  } else {
    const double cross = std::clamp(offset / slope, 0.0, 1.0);
    if (slope > 0.0) {
      a_from = cross;  // a drops faster, wins after the crossing
      a_to = 1.0;
    } else {
      a_from = 0.0;
      a_to = cross;
    }
  }
  const auto along = [](const Segment& s, double from, double to) {
    ActionEstimate e;
    e.action = s.action;
    e.probability = to - from;
    e.expectation = e.probability > 0.0 ? s.hi - s.drop * 0.5 * (from + to) : s.mid();
    return e;
  };
  out.actions.push_back(along(a, a_from, a_to));
  if (a_from > 0.0)
    out.actions.push_back(along(b, 0.0, a_from));
  else
    out.actions.push_back(along(b, a_to, 1.0));
  return out;
}

inline RecommendEstimate estimate(DropModel model, std::span<const Segment> segs) {
  return model == DropModel::kCorrelated ? estimate_correlated(segs)
                                         : estimate_uncorrelated(segs);
}

/// Up to two acting actions with the lowest projected bound hi - drop (a
/// missing drop counts as zero), sorted ascending, ties to the lower index.
/// Single linear scan.
inline std::vector<ActionIndex> candidate_actions(const BaseMdp& m, const BoundsState& b,
                                                  const DropHistory& d, StateIndex s) {
  constexpr ActionIndex kNone = static_cast<ActionIndex>(-1);
  std::array<ActionIndex, 2> best{kNone, kNone};
  std::array<double, 2> key{kInfinity, kInfinity};
  for (ActionIndex a = 0; a < m.action_count(); ++a) {
    if (a == m.nop_action() || !m.enabled(s, a)) continue;
    const double u = detail::lookahead(m, b.upper, s, a) - d.drop(s, a).value_or(0.0);
    if (best[0] == kNone || u < key[0]) {
      best[1] = best[0];
      key[1] = key[0];
      best[0] = a;
      key[0] = u;
    } else if (best[1] == kNone || u < key[1]) {
      best[1] = a;
      key[1] = u;
    }
  }
  std::vector<ActionIndex> out;
  for (auto a : best)
    if (a != kNone) out.push_back(a);
  return out;
}

/// Segments for the candidate actions at s, or nullopt when any candidate
/// lacks a drop record.
inline std::optional<std::vector<Segment>> candidate_segments(const BaseMdp& m,
                                                              const BoundsState& b,
                                                              const DropHistory& d,
                                                              StateIndex s) {
  std::vector<Segment> segs;
  for (ActionIndex a : candidate_actions(m, b, d, s)) {
    const auto drop = d.drop(s, a);
    if (!drop) return std::nullopt;
    segs.push_back({a, detail::lookahead(m, b.upper, s, a), *drop});
  }
  if (segs.empty()) return std::nullopt;
  return segs;
}

/// True when every non-goal NOP successor of s has drop records for its
/// candidate actions.
inline bool has_nop_information(const BaseMdp& m, const BoundsState& b, const DropHistory& d,
                                StateIndex s) {
  if (!m.enabled(s, m.nop_action())) return false;
  for (const auto& o : m.successors(s, m.nop_action()))
    if (!m.is_goal(o.state) && !candidate_segments(m, b, d, o.state)) return false;
  return true;
}

/**
 * Estimated Q of thinking one more cycle, under the meta-myopic assumption:
 * C(s, NOP) + sum_s' T(s, NOP, s') sum_a P(a at s') E[Q(s', a) | a at s'].
 * nullopt means no drop information at some NOP successor.
 */
inline std::optional<double> q_nop_estimate(const BaseMdp& m, const BoundsState& b,
                                            const DropHistory& d, StateIndex s, DropModel model) {
  const ActionIndex nop = m.nop_action();
  if (!m.enabled(s, nop)) return std::nullopt;
  double q = m.cost(s, nop);
  for (const auto& o : m.successors(s, nop)) {
    if (m.is_goal(o.state)) continue;
    const auto segs = candidate_segments(m, b, d, o.state);
    if (!segs) return std::nullopt;
    q += o.probability * estimate(model, *segs).expected_value();
  }
  return q;
}

/// Estimated Q of acting on the recommendation now: the midpoint of its
/// projected segment, Qup(s, f) - drop(s, f) / 2.
inline double q_act_estimate(const BaseMdp& m, const BoundsState& b, const DropHistory& d,
                             StateIndex s) {
  const ActionIndex f = recommended_action(b, m, s);
  return detail::lookahead(m, b.upper, s, f) - 0.5 * d.drop(s, f).value_or(0.0);
}

enum class MetaDecision { kThink, kAct };

inline std::string_view to_string(MetaDecision d) {
  return d == MetaDecision::kThink ? "think" : "act";
}

struct VocEstimate {
  double q_act = 0.0;
  double q_nop = std::numeric_limits<double>::quiet_NaN();
  double voc = std::numeric_limits<double>::quiet_NaN();
  MetaDecision decision = MetaDecision::kThink;
  ActionIndex action = 0;  // f(s, chi)
  bool no_information = false;
};

/// Think iff the NOP successors lack drop history or VOC = q_act - q_nop > 0.
inline VocEstimate decide(const BaseMdp& m, const BoundsState& b, const DropHistory& d,
                          StateIndex s, DropModel model) {
  VocEstimate v;
  v.action = recommended_action(b, m, s);
  v.q_act = q_act_estimate(m, b, d, s);
  const auto q_nop = q_nop_estimate(m, b, d, s, model);
  if (!q_nop) {
    v.no_information = true;
    v.decision = MetaDecision::kThink;
    return v;
  }
  v.q_nop = *q_nop;
  v.voc = v.q_act - v.q_nop;
  v.decision = v.voc > 0.0 ? MetaDecision::kThink : MetaDecision::kAct;
  return v;
}

}  // namespace metareason
