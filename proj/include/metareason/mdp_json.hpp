#pragma once

#include "metareason/mdp.hpp"

#include <nlohmann/json.hpp>

namespace metareason {

/// Reads {states, actions, nop, start, goal, transitions: [[s,a,s',p],...],
/// costs: [[s,a,c],...]}. `goal` may also be an array of goal states, the
/// first being the designated one.
inline BaseMdp mdp_from_json(const nlohmann::json& j) {
  try {
    const auto states = j.at("states").get<std::size_t>();
    const auto actions = j.at("actions").get<std::size_t>();
    const auto nop = j.at("nop").get<std::size_t>();
    const auto start = j.at("start").get<std::size_t>();
    std::vector<std::size_t> goals;
    if (j.at("goal").is_array())
      goals = j.at("goal").get<std::vector<std::size_t>>();
    else
      goals.push_back(j.at("goal").get<std::size_t>());
    if (goals.empty()) throw StructuralError("malformed MDP: [empty goal list]");

    MdpBuilder b(states, actions, nop, start, goals.front());
    for (std::size_t i = 1; i < goals.size(); ++i) b.add_goal(goals[i]);
    for (const auto& t : j.at("transitions")) {
      if (!t.is_array() || t.size() != 4)
        throw StructuralError("malformed MDP: [transition entry " + t.dump() +
                              " is not [s, a, s', p]]");
      b.add_transition(t[0].get<std::size_t>(), t[1].get<std::size_t>(),
                       t[2].get<std::size_t>(), t[3].get<double>());
    }
    if (j.contains("costs")) {
      for (const auto& c : j.at("costs")) {
        if (!c.is_array() || c.size() != 3)
          throw StructuralError("malformed MDP: [cost entry " + c.dump() + " is not [s, a, c]]");
        b.set_cost(c[0].get<std::size_t>(), c[1].get<std::size_t>(), c[2].get<double>());
      }
    }
    return b.build();
  } catch (const nlohmann::json::exception& e) {
    throw StructuralError(std::string("malformed MDP JSON: ") + e.what());
  }
}

inline nlohmann::json mdp_to_json(const BaseMdp& m) {
  nlohmann::json j;
  j["states"] = m.state_count();
  j["actions"] = m.action_count();
  j["nop"] = m.nop_action();
  j["start"] = m.start_state();
  std::vector<std::size_t> goals{m.goal_state()};
  for (StateIndex s = 0; s < m.state_count(); ++s)
    if (m.is_goal(s) && s != m.goal_state()) goals.push_back(s);
  if (goals.size() == 1)
    j["goal"] = goals.front();
  else
    j["goal"] = goals;
  auto transitions = nlohmann::json::array();
  auto costs = nlohmann::json::array();
  for (StateIndex s = 0; s < m.state_count(); ++s) {
    for (ActionIndex a = 0; a < m.action_count(); ++a) {
      if (!m.enabled(s, a)) continue;
      for (const auto& o : m.successors(s, a))
        transitions.push_back({s, a, o.state, o.probability});
      if (m.cost(s, a) != 0.0) costs.push_back({s, a, m.cost(s, a)});
    }
  }
  j["transitions"] = std::move(transitions);
  j["costs"] = std::move(costs);
  return j;
}

}  // namespace metareason
