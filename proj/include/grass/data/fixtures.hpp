#pragma once

#include "grass/shape/part_graph.hpp"

#include <set>
#include <string>
#include <vector>

namespace grass {

// A flat box arrangement exercising one grouping precedence rule. A parse
// agrees with the rule when its first merge covers exactly one of the
// expected part sets.
struct RuleFixture {
  std::string rule;
  std::string expectation;
  PartGraph graph;
  std::vector<std::set<int>> expected_first;
};

// M1, M2, G1, G2, G3, A1, A2 in that order. Boxes are 0.01 thick in z.
std::vector<RuleFixture> fixture_arrangements();

}  // namespace grass
