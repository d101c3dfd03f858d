#include "grass/shape/hierarchy.hpp"

#include <algorithm>
#include <functional>

namespace grass {

std::string to_string(NodeType t) {
  switch (t) {
    case NodeType::adjacency:
      return "adj";
    case NodeType::symmetry:
      return "sym";
    case NodeType::leaf:
      return "leaf";
  }
  return "?";
}

bool HierarchyNode::operator==(const HierarchyNode& o) const {
  if (type != o.type || part != o.part || !(box == o.box) || left != o.left || right != o.right ||
      parts != o.parts || code.has_value() != o.code.has_value()) {
    return false;
  }
  if (type == NodeType::symmetry && !(sym == o.sym)) return false;
  if (code && (code->size() != o.code->size() || *code != *o.code)) return false;
  return true;
}

int Hierarchy::add_leaf(int part, const Obbd& box) {
  HierarchyNode n;
  n.type = NodeType::leaf;
  n.part = part;
  n.box = box;
  if (part >= 0) n.parts = {part};
  nodes.push_back(std::move(n));
  return root();
}

int Hierarchy::add_adjacency(int left, int right) {
  HierarchyNode n;
  n.type = NodeType::adjacency;
  n.left = left;
  n.right = right;
  n.parts = nodes.at(left).parts;
  n.parts.insert(n.parts.end(), nodes.at(right).parts.begin(), nodes.at(right).parts.end());
  std::sort(n.parts.begin(), n.parts.end());
  nodes.push_back(std::move(n));
  return root();
}

int Hierarchy::add_symmetry(int child, const SymmetrySpecd& spec) {
  HierarchyNode n;
  n.type = NodeType::symmetry;
  n.left = child;
  n.sym = spec;
  n.parts = nodes.at(child).parts;
  nodes.push_back(std::move(n));
  return root();
}

std::vector<int> Hierarchy::parents() const {
  std::vector<int> p(nodes.size(), -1);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].left >= 0) p[nodes[i].left] = static_cast<int>(i);
    if (nodes[i].right >= 0) p[nodes[i].right] = static_cast<int>(i);
  }
  return p;
}

std::vector<int> Hierarchy::depths() const {
  std::vector<int> d(nodes.size(), 0);
  for (int i = root(); i >= 0; --i) {
    const auto& n = nodes[i];
    if (n.left >= 0) d[n.left] = d[i] + 1;
    if (n.right >= 0) d[n.right] = d[i] + 1;
  }
  return d;
}

std::vector<int> Hierarchy::heights() const {
  std::vector<int> h(nodes.size(), 0);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (n.left >= 0) h[i] = std::max(h[i], h[n.left] + 1);
    if (n.right >= 0) h[i] = std::max(h[i], h[n.right] + 1);
  }
  return h;
}

int Hierarchy::leaf_count() const {
  return static_cast<int>(std::count_if(nodes.begin(), nodes.end(),
                                        [](const HierarchyNode& n) { return n.type == NodeType::leaf; }));
}

int Hierarchy::depth() const {
  if (nodes.empty()) return 0;
  const auto d = depths();
  return *std::max_element(d.begin(), d.end());
}

std::vector<ExpandedLeaf> expand_leaves(const Hierarchy& h, int subtree) {
  std::vector<ExpandedLeaf> out;
  if (h.empty()) return out;
  if (subtree < 0) subtree = h.root();
  std::function<void(int, const Eigen::Affine3d&, bool)> walk = [&](int i, const Eigen::Affine3d& t, bool image) {
    const auto& n = h[i];
    switch (n.type) {
      case NodeType::leaf:
        out.push_back({i, image, transform_obb(n.box, t)});
        break;
      case NodeType::adjacency:
        walk(n.left, t, image);
        walk(n.right, t, image);
        break;
      case NodeType::symmetry:
        for (int j = 0; j < n.sym.fold; ++j) walk(n.left, t * symmetry_transform(n.sym, j), image || j > 0);
        break;
    }
  };
  walk(subtree, Eigen::Affine3d::Identity(), false);
  return out;
}

std::vector<Obbd> expand_boxes(const Hierarchy& h, int subtree) {
  std::vector<Obbd> out;
  for (auto& l : expand_leaves(h, subtree)) out.push_back(l.box);
  return out;
}

Obbd subtree_hull(const Hierarchy& h, int node) { return axis_aligned_hull<double>(expand_boxes(h, node)); }

std::string topology_key(const Hierarchy& h, int node) {
  if (h.empty()) return "";
  if (node < 0) node = h.root();
  const auto& n = h[node];
  switch (n.type) {
    case NodeType::leaf:
      return "L";
    case NodeType::adjacency:
      return "A(" + topology_key(h, n.left) + "," + topology_key(h, n.right) + ")";
    case NodeType::symmetry:
      return "S(" + topology_key(h, n.left) + ")";
  }
  return "?";
}

bool same_topology(const Hierarchy& a, const Hierarchy& b) { return topology_key(a) == topology_key(b); }

Hierarchy extract_subtree(const Hierarchy& h, int node) {
  Hierarchy out;
  std::function<int(int)> copy = [&](int i) {
    HierarchyNode n = h[i];
    if (n.left >= 0) n.left = copy(n.left);
    if (n.right >= 0) n.right = copy(n.right);
    out.nodes.push_back(std::move(n));
    return out.root();
  };
  copy(node);
  return out;
}

void check_hierarchy(const Hierarchy& h, const PartGraph& g, double tol) {
  if (h.empty()) throw GraphInvariantError("empty hierarchy");
  std::vector<int> parent_count(h.nodes.size(), 0);
  for (int i = 0; i <= h.root(); ++i) {
    const auto& n = h[i];
    auto child = [&](int c) {
      if (c < 0 || c >= i) throw GraphInvariantError("node " + std::to_string(i) + " has a bad child index");
      ++parent_count[c];
    };
    switch (n.type) {
      case NodeType::leaf:
        if (n.left >= 0 || n.right >= 0) throw GraphInvariantError("leaf with children");
        if (!is_valid(n.box)) throw GraphInvariantError("leaf " + std::to_string(i) + " has an invalid box");
        break;
      case NodeType::adjacency:
        child(n.left);
        child(n.right);
        break;
      case NodeType::symmetry:
        child(n.left);
        if (n.right >= 0) throw GraphInvariantError("symmetry node with two children");
        if (!is_valid(n.sym)) throw GraphInvariantError("symmetry node " + std::to_string(i) + " has an invalid spec");
        break;
    }
  }
  for (int i = 0; i < h.root(); ++i) {
    if (parent_count[i] != 1) throw GraphInvariantError("node " + std::to_string(i) + " is not a tree node");
  }

  const auto boxes = expand_boxes(h);
  if (boxes.size() != g.parts.size()) {
    throw GraphInvariantError("hierarchy expands to " + std::to_string(boxes.size()) + " boxes for " +
                              std::to_string(g.parts.size()) + " parts");
  }
  std::vector<bool> used(g.parts.size(), false);
  for (const auto& b : boxes) {
    bool matched = false;
    for (std::size_t p = 0; p < g.parts.size(); ++p) {
      if (!used[p] && corner_set_distance(b, g.parts[p].box) <= tol) {
        used[p] = matched = true;
        break;
      }
    }
    if (!matched) throw GraphInvariantError("expanded box matches no remaining part");
  }
}

}  // namespace grass
