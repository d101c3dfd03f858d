#pragma once

#include "grass/core/tensor.hpp"
#include "grass/shape/part_graph.hpp"

#include <optional>
#include <string>
#include <vector>

namespace grass {

enum class NodeType { adjacency = 0, symmetry = 1, leaf = 2 };

std::string to_string(NodeType t);

struct HierarchyNode {
  NodeType type = NodeType::leaf;
  // Leaf: part id (or -1 when unknown, e.g. after free decoding).
  int part = -1;
  Obbd box;
  // Adjacency: left, right. Symmetry: left is the generator subtree.
  int left = -1;
  int right = -1;
  SymmetrySpecd sym;
  // Ids of every part this subtree covers, including symmetry images.
  std::vector<int> parts;
  std::optional<Vector> code;

  bool operator==(const HierarchyNode& o) const;
};

// Flat tree storage: children always precede their parent, and the root is
// the last node.
struct Hierarchy {
  std::vector<HierarchyNode> nodes;

  int root() const { return static_cast<int>(nodes.size()) - 1; }
  bool empty() const { return nodes.empty(); }
  const HierarchyNode& operator[](int i) const { return nodes[static_cast<std::size_t>(i)]; }
  HierarchyNode& operator[](int i) { return nodes[static_cast<std::size_t>(i)]; }

  int add_leaf(int part, const Obbd& box);
  int add_adjacency(int left, int right);
  int add_symmetry(int child, const SymmetrySpecd& spec);

  std::vector<int> parents() const;
  std::vector<int> depths() const;
  // Leaf count is 0, otherwise 1 + the tallest child.
  std::vector<int> heights() const;
  int leaf_count() const;
  int depth() const;

  bool operator==(const Hierarchy&) const = default;
};

struct ExpandedLeaf {
  int node = -1;
  // True when the box is a symmetry copy rather than the leaf itself.
  bool image = false;
  Obbd box;
};

// Expands every symmetry node into its fold members; members are in
// generator-subtree traversal order, copy-major.
std::vector<ExpandedLeaf> expand_leaves(const Hierarchy& h, int subtree = -1);
std::vector<Obbd> expand_boxes(const Hierarchy& h, int subtree = -1);

// Subtree bounding box of all expanded members (axis-aligned hull).
Obbd subtree_hull(const Hierarchy& h, int node);

// Node types and arity only.
bool same_topology(const Hierarchy& a, const Hierarchy& b);
std::string topology_key(const Hierarchy& h, int node = -1);

// Copies the subtree rooted at `node` into a standalone hierarchy.
Hierarchy extract_subtree(const Hierarchy& h, int node);

// Checks structural invariants and that the expanded leaves match the
// parts of `g` one-to-one (each within `tol` corner distance).
void check_hierarchy(const Hierarchy& h, const PartGraph& g, double tol = 1e-6);

}  // namespace grass
