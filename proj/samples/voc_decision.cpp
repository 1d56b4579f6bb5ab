// Compares the two drop models on a pair of projected segments.

#include "metareason/voc.hpp"

#include <iostream>

using namespace metareason;

int main() {
  const std::vector<Segment> segs{{0, 10.0, 4.0}, {1, 9.0, 1.0}};
  for (auto model : {DropModel::kUncorrelated, DropModel::kCorrelated}) {
    const RecommendEstimate e = estimate(model, segs);
    std::cout << (model == DropModel::kCorrelated ? "correlated" : "uncorrelated") << ":\n";
    for (const auto& a : e.actions)
      std::cout << "  action " << a.action << " p=" << a.probability
                << " E[Q|recommended]=" << a.expectation << '\n';
    std::cout << "  expected next bound " << e.expected_value() << '\n';
  }
}
