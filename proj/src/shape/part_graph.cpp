#include "grass/shape/part_graph.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace grass {

std::string to_string(SymmetryKind k) {
  switch (k) {
    case SymmetryKind::reflective:
      return "reflective";
    case SymmetryKind::rotational:
      return "rotational";
    case SymmetryKind::translational:
      return "translational";
  }
  return "?";
}

SymmetryKind symmetry_kind_from_string(const std::string& s) {
  if (s == "reflective") return SymmetryKind::reflective;
  if (s == "rotational") return SymmetryKind::rotational;
  if (s == "translational") return SymmetryKind::translational;
  throw std::invalid_argument("unknown symmetry kind '" + s + "'");
}

int PartGraph::index_of(int part_id) const {
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (parts[i].id == part_id) return static_cast<int>(i);
  }
  throw GraphInvariantError("no part with id " + std::to_string(part_id));
}

std::vector<Obbd> PartGraph::boxes() const {
  std::vector<Obbd> out;
  out.reserve(parts.size());
  for (const auto& p : parts) out.push_back(p.box);
  return out;
}

void normalize_edges(std::vector<std::pair<int, int>>& edges) {
  for (auto& [a, b] : edges) {
    if (a > b) std::swap(a, b);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}

namespace {

int find(std::vector<int>& parent, int x) {
  while (parent[x] != x) x = parent[x] = parent[parent[x]];
  return x;
}

}  // namespace

bool is_connected(const PartGraph& g) {
  if (g.parts.empty()) return false;
  std::vector<int> parent(g.parts.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto unite = [&](int a, int b) { parent[find(parent, g.index_of(a))] = find(parent, g.index_of(b)); };
  for (const auto& [a, b] : g.adjacency) unite(a, b);
  for (const auto& s : g.symmetries) {
    for (int m : s.members) unite(s.generator, m);
  }
  const int root = find(parent, 0);
  for (std::size_t i = 1; i < parent.size(); ++i) {
    if (find(parent, static_cast<int>(i)) != root) return false;
  }
  return true;
}

void validate(const PartGraph& g, bool require_connected) {
  if (g.parts.empty()) throw GraphInvariantError("part graph has no parts");
  std::set<int> ids;
  for (const auto& p : g.parts) {
    if (!ids.insert(p.id).second) throw GraphInvariantError("duplicate part id " + std::to_string(p.id));
    if (!is_valid(p.box)) throw GraphInvariantError("part " + std::to_string(p.id) + " has an invalid box");
  }
  for (const auto& [a, b] : g.adjacency) {
    if (!ids.count(a) || !ids.count(b)) {
      throw GraphInvariantError("adjacency edge (" + std::to_string(a) + ", " + std::to_string(b) +
                                ") references a missing part");
    }
    if (a == b) throw GraphInvariantError("self-loop on part " + std::to_string(a));
  }
  for (const auto& s : g.symmetries) {
    if (!is_valid(s.spec)) throw GraphInvariantError("invalid symmetry spec");
    if (static_cast<int>(s.members.size()) != s.spec.fold) {
      throw GraphInvariantError("symmetry member count differs from fold");
    }
    if (s.members.empty() || s.members.front() != s.generator) {
      throw GraphInvariantError("symmetry members must start with the generator");
    }
    if (std::set<int>(s.members.begin(), s.members.end()).size() != s.members.size()) {
      throw GraphInvariantError("symmetry members are not distinct");
    }
    for (int m : s.members) {
      if (!ids.count(m)) throw GraphInvariantError("symmetry member " + std::to_string(m) + " is missing");
    }
  }
  if (require_connected && !is_connected(g)) throw GraphInvariantError("relation graph is disconnected");
}

}  // namespace grass
