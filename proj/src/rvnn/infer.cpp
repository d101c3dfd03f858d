#include "grass/rvnn/infer.hpp"

#include <limits>
#include <map>

namespace grass {

namespace {

struct NodeState {
  Vector code;
  // Squared box error of the subtree decoded from `code`.
  double error = 0.0;
};

using States = std::map<int, NodeState>;

struct Step {
  ContractedGraph graph;
  int node;
  NodeState state;
  // Change of the summed error over current nodes.
  double delta;
};

Step apply(const RvnnModel& model, const ContractedGraph& g, const MergeCandidate& c, const States& states) {
  ContractedGraph next = contract(g, c);
  const int node = next.nodes().back();
  const auto& n = next.tree()[node];
  Vector code = n.type == NodeType::adjacency
                    ? model.encode_adj(states.at(n.left).code, states.at(n.right).code)
                    : model.encode_sym(states.at(n.left).code, sym_to_vec(n.sym));
  const double error = subtree_error(model, code, extract_subtree(next.tree(), node)).sum;
  double delta = error;
  for (int m : c.nodes) delta -= states.at(m).error;
  return {std::move(next), node, {std::move(code), error}, delta};
}

}  // namespace

Hierarchy infer_hierarchy(const PartGraph& pg, const RvnnModel& model, const InferOptions& options,
                          std::vector<std::vector<int>>* merges) {
  if (merges) merges->clear();
  ContractedGraph g(pg);
  States states;
  for (int n : g.nodes()) {
    const Obbd& box = g.tree()[n].box;
    Vector code = model.encode_leaf(box);
    const double error = (obb_to_vec(model.decode_leaf(code)) - obb_to_vec(box)).squaredNorm();
    states[n] = {std::move(code), error};
  }

  while (g.size() > 1) {
    const auto cands = mergeable_candidates(g);
    if (cands.empty()) throw GraphInvariantError("no mergeable candidates; the part graph is disconnected");
    std::size_t best = 0;
    double best_score = std::numeric_limits<double>::infinity();
    std::vector<Step> first;
    first.reserve(cands.size());
    for (std::size_t i = 0; i < cands.size(); ++i) {
      first.push_back(apply(model, g, cands[i], states));
      const Step& s1 = first.back();
      double score = s1.delta;
      const auto second = options.lookahead ? mergeable_candidates(s1.graph) : std::vector<MergeCandidate>{};
      if (!second.empty()) {
        States next = states;
        next[s1.node] = s1.state;
        double best_second = std::numeric_limits<double>::infinity();
        for (const auto& c : second) best_second = std::min(best_second, apply(model, s1.graph, c, next).delta);
        score += best_second;
      }
      if (score < best_score) {
        best_score = score;
        best = i;
      }
    }
    Step& chosen = first[best];
    states[chosen.node] = std::move(chosen.state);
    g = std::move(chosen.graph);
    if (merges) merges->push_back(g.tree()[chosen.node].parts);
  }
  return g.hierarchy();
}

}  // namespace grass
