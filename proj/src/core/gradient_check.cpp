#include "grass/core/gradient_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace grass {

GradientCheckReport gradient_check(Graph& graph, Var out, ParameterStore& store,
                                   const GradientCheckOptions& options) {
  graph.invalidate();
  graph.forward(out);
  const GradientMap analytic = graph.backward(out);

  GradientCheckReport report;
  report.tolerance = options.tolerance;
  Rng rng(options.seed);
  for (auto& entry : store.entries()) {
    auto it = analytic.find(entry.name);
    if (it == analytic.end()) continue;
    const Matrix& grad = it->second;
    auto vals = entry.value.values();

    std::vector<std::size_t> idx(vals.size());
    std::iota(idx.begin(), idx.end(), 0);
    if (options.max_elements_per_parameter > 0 &&
        idx.size() > static_cast<std::size_t>(options.max_elements_per_parameter)) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(static_cast<std::size_t>(options.max_elements_per_parameter));
      std::sort(idx.begin(), idx.end());
    }

    GradientCheckReport::Item item{entry.name, 0.0, 0};
    for (std::size_t i : idx) {
      const double saved = vals[i];
      vals[i] = saved + options.step;
      graph.invalidate();
      const double fp = graph.forward(out)(0, 0);
      vals[i] = saved - options.step;
      graph.invalidate();
      const double fm = graph.forward(out)(0, 0);
      vals[i] = saved;
      const double numeric = (fp - fm) / (2.0 * options.step);
      const double a = grad.data()[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      item.max_relative_error = std::max(item.max_relative_error, std::abs(a - numeric) / denom);
      ++item.checked;
    }
    report.max_relative_error = std::max(report.max_relative_error, item.max_relative_error);
    report.items.push_back(std::move(item));
  }
  graph.invalidate();
  graph.forward(out);
  report.passed = report.max_relative_error < options.tolerance;
  return report;
}

}  // namespace grass
