#pragma once

#include "grass/core/parameter_store.hpp"
#include "grass/data/shape_record.hpp"
#include "grass/shape/hierarchy.hpp"

#include <map>
#include <set>
#include <utility>
#include <vector>

namespace grass {

struct MergeCandidate {
  enum class Kind { adjacency, symmetry };
  Kind kind = Kind::adjacency;
  // Hierarchy node ids of the merged nodes. Adjacency: the two endpoints,
  // smaller id first. Symmetry: generator first, then nodes[j] = T^j(generator).
  std::vector<int> nodes;
  SymmetrySpecd spec;

  bool operator==(const MergeCandidate& o) const;
};

// A symmetry relation between current nodes, in candidate form.
using NodeSymmetry = MergeCandidate;

// One symmetry transform found in the input shape, with the part it sends
// each part to (-1 when no part matches).
struct SymmetryLibraryEntry {
  SymmetrySpecd spec;
  std::map<int, int> image;
};

// A part graph partway through bottom-up merging. Every current node is a
// subtree of `tree()`; the original parts are its leaves.
class ContractedGraph {
 public:
  explicit ContractedGraph(const PartGraph& g);

  const Hierarchy& tree() const { return tree_; }
  const std::vector<int>& nodes() const { return active_; }
  const std::set<std::pair<int, int>>& edges() const { return edges_; }
  const std::vector<NodeSymmetry>& symmetries() const { return symmetries_; }
  const std::vector<SymmetryLibraryEntry>& library() const { return library_; }
  // Axis-aligned box of every member corner of the node.
  const Obbd& box(int node) const { return boxes_.at(node); }
  std::size_t size() const { return active_.size(); }

  // Merges in place and returns the new node id.
  int merge(const MergeCandidate& c);
  // The tree rooted at the last remaining node, without orphaned subtrees.
  Hierarchy hierarchy() const;

 private:
  void detect_symmetries();

  Hierarchy tree_;
  std::vector<int> active_;
  std::set<std::pair<int, int>> edges_;
  std::vector<NodeSymmetry> symmetries_;
  std::vector<SymmetryLibraryEntry> library_;
  std::map<int, Obbd> boxes_;
};

// Every adjacency edge, then every symmetry relation whose members are all
// current nodes. Relations are re-detected after each merge from the input
// shape's symmetry transforms, so groups of merged subtrees can appear.
std::vector<MergeCandidate> mergeable_candidates(const ContractedGraph& g);

// Pure form of ContractedGraph::merge. The merged node takes the union of
// its members' external edges; relations touching a merged member vanish.
ContractedGraph contract(const ContractedGraph& g, const MergeCandidate& c);

// Merges a uniformly random candidate until one node remains. When `trail`
// is given it receives the chosen candidate of every step. Throws
// GraphInvariantError if merging gets stuck with more than one node.
Hierarchy sample_hierarchy(const PartGraph& g, Rng& rng, std::vector<MergeCandidate>* trail = nullptr);

// `count` independent samples; duplicates are kept.
std::vector<Hierarchy> training_hierarchies(const ShapeRecord& shape, int count, Rng& rng);
std::vector<Hierarchy> training_hierarchies(const PartGraph& g, int count, Rng& rng);

}  // namespace grass
