#pragma once

#include "metareason/voc.hpp"

#include <optional>
#include <sstream>
#include <string>
#include <string_view>

namespace metareason {

enum class AgentKind {
  kThinkStarAct,
  kProb,
  kNoInfoThink,
  kHeuristic,
  kMetareasoner,
  kUncorrMetareasoner,
};

inline std::string_view to_string(AgentKind k) {
  switch (k) {
    case AgentKind::kThinkStarAct: return "think_star_act";
    case AgentKind::kProb: return "prob";
    case AgentKind::kNoInfoThink: return "no_info_think";
    case AgentKind::kHeuristic: return "heuristic";
    case AgentKind::kMetareasoner: return "metareasoner";
    case AgentKind::kUncorrMetareasoner: return "uncorr_metareasoner";
  }
  return "unknown";
}

inline AgentKind parse_agent_kind(std::string_view name) {
  if (name == "think_star_act" || name == "thinkstaract") return AgentKind::kThinkStarAct;
  if (name == "prob") return AgentKind::kProb;
  if (name == "no_info_think" || name == "noinfothink") return AgentKind::kNoInfoThink;
  if (name == "heuristic") return AgentKind::kHeuristic;
  if (name == "metareasoner") return AgentKind::kMetareasoner;
  if (name == "uncorr_metareasoner") return AgentKind::kUncorrMetareasoner;
  throw std::invalid_argument("unknown agent kind '" + std::string(name) + "'");
}

struct AgentConfig {
  AgentKind kind = AgentKind::kMetareasoner;
  std::optional<std::size_t> n;  // think_star_act
  std::optional<double> p;       // prob

  static AgentConfig think_star_act(std::size_t cycles) {
    return {AgentKind::kThinkStarAct, cycles, std::nullopt};
  }
  static AgentConfig prob(double p_think) { return {AgentKind::kProb, std::nullopt, p_think}; }
  static AgentConfig of(AgentKind k) { return {k, std::nullopt, std::nullopt}; }

  void validate() const {
    const bool needs_n = kind == AgentKind::kThinkStarAct;
    const bool needs_p = kind == AgentKind::kProb;
    if (needs_n != n.has_value())
      throw std::invalid_argument(needs_n ? "think_star_act needs n" : "n given for an agent without it");
    if (needs_p != p.has_value())
      throw std::invalid_argument(needs_p ? "prob needs p" : "p given for an agent without it");
    if (p && !(*p >= 0.0 && *p <= 1.0)) throw std::invalid_argument("p must lie in [0, 1]");
  }

  /// Agent parameter as text, empty for parameterless agents.
  std::string param() const {
    std::ostringstream os;
    if (n) os << *n;
    if (p) os << *p;
    return os.str();
  }

  std::string label() const {
    std::string s(to_string(kind));
    if (n) s += "[n=" + param() + "]";
    if (p) s += "[p=" + param() + "]";
    return s;
  }
};

/// "metareasoner", "think_star_act:5", "prob:0.3", ...
inline AgentConfig parse_agent(std::string_view spec) {
  const auto colon = spec.find(':');
  AgentConfig cfg = AgentConfig::of(parse_agent_kind(spec.substr(0, colon)));
  if (colon != std::string_view::npos) {
    const std::string arg(spec.substr(colon + 1));
    if (cfg.kind == AgentKind::kThinkStarAct)
      cfg.n = std::stoul(arg);
    else if (cfg.kind == AgentKind::kProb)
      cfg.p = std::stod(arg);
    else
      throw std::invalid_argument("agent '" + std::string(spec) + "' takes no parameter");
  }
  cfg.validate();
  return cfg;
}

struct AgentDecision {
  MetaDecision decision = MetaDecision::kAct;
  ActionIndex action = 0;            // meaningful when acting
  std::optional<VocEstimate> voc;    // metareasoners only
};

/// Per-episode agent bookkeeping.
struct AgentEpisodeState {
  std::size_t decisions = 0;
};

/// One think-or-act choice. Acting always uses the planner's current
/// recommendation.
inline AgentDecision agent_step(const AgentConfig& cfg, AgentEpisodeState& ep, const BaseMdp& m,
                                const BoundsState& b, const DropHistory& d, StateIndex s,
                                Rng& rng) {
  AgentDecision out;
  const std::size_t index = ep.decisions++;
  bool think = false;
  switch (cfg.kind) {
    case AgentKind::kThinkStarAct:
      think = index < cfg.n.value_or(0);
      break;
    case AgentKind::kProb:
      think = uniform01(rng) < cfg.p.value_or(0.0);
      break;
    case AgentKind::kNoInfoThink:
      think = !has_nop_information(m, b, d, s);
      break;
    case AgentKind::kHeuristic:
      think = false;
      break;
    case AgentKind::kMetareasoner:
    case AgentKind::kUncorrMetareasoner: {
      const auto model = cfg.kind == AgentKind::kMetareasoner ? DropModel::kCorrelated
                                                              : DropModel::kUncorrelated;
      out.voc = decide(m, b, d, s, model);
      think = out.voc->decision == MetaDecision::kThink;
      break;
    }
  }
  out.decision = think ? MetaDecision::kThink : MetaDecision::kAct;
  out.action = think ? m.nop_action() : recommended_action(b, m, s);
  return out;
}

}  // namespace metareason
