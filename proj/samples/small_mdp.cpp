// Builds a four-state MDP, solves it, and solves its exact meta-MDP.

#include "metareason/meta_exact.hpp"

#include <iostream>

using namespace metareason;

int main() {
  // States 0 -> 1 -> 2 -> 3 (goal). Action 0 walks one step, action 1 tries a
  // shortcut to the goal that fails half the time. Action 2 is NOP.
  MdpBuilder b(4, 3, 2, 0, 3);
  for (StateIndex s = 0; s < 3; ++s) {
    b.add_transition(s, 0, s + 1, 1.0);
    b.set_cost(s, 0, 1.0);
    b.add_transition(s, 1, 3, 0.5);
    b.add_transition(s, 1, 0, 0.5);
    b.set_cost(s, 1, 1.5);
    b.add_transition(s, 2, s, 1.0);
    b.set_cost(s, 2, 0.25);
  }
  const BaseMdp m = b.build();
  const auto report = validate_ssp(m);
  std::cout << "ssp: " << (report.is_ssp ? "yes" : "no") << '\n';

  const Solution sol = value_iteration(m);
  for (StateIndex s = 0; s < m.state_count(); ++s)
    std::cout << "V*(" << s << ") = " << sol.value[s] << "  action " << sol.policy[s] << '\n';

  const SolverTrace trace = instrument_solver(m);
  const MetaMdp meta = construct_meta_mdp(m, trace);
  const Solution meta_sol = solve_meta(meta);
  std::cout << "trace length " << trace.length() << ", product states "
            << meta.product.state_count() << ", meta value "
            << meta_sol.value[meta.product.start_state()] << '\n';
}
