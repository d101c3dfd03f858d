#pragma once

#include "grass/core/graph.hpp"

#include <string>
#include <vector>

namespace grass {

struct GradientCheckOptions {
  double tolerance = 1e-4;
  double step = 1e-5;
  // Errors are relative to max(|analytic|, |numeric|, floor).
  double floor = 1e-3;
  // 0 checks every element; otherwise a seeded random subset per parameter.
  int max_elements_per_parameter = 0;
  std::uint64_t seed = 1;
};

struct GradientCheckReport {
  struct Item {
    std::string name;
    double max_relative_error = 0.0;
    int checked = 0;
  };
  std::vector<Item> items;
  double max_relative_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

// Compares backward() against central finite differences of forward(),
// perturbing each parameter element in the store in place.
GradientCheckReport gradient_check(Graph& graph, Var out, ParameterStore& store,
                                   const GradientCheckOptions& options = {});

}  // namespace grass
