#include "grass/sampler/sampler.hpp"

#include "grass/shape/relations.hpp"

#include <algorithm>
#include <stdexcept>

namespace grass {

namespace {

bool same_transform(const SymmetrySpecd& a, const SymmetrySpecd& b) {
  if (a.kind != b.kind) return false;
  if (a.kind == SymmetryKind::translational) return (a.direction - b.direction).norm() <= 1e-6;
  return equivalent(a, b, 1e-6);
}

// Image of a part set, or empty if some part has no image.
std::vector<int> image_of(const std::vector<int>& parts, const std::map<int, int>& image) {
  std::vector<int> out;
  out.reserve(parts.size());
  for (int p : parts) {
    auto it = image.find(p);
    if (it == image.end() || it->second < 0) return {};
    out.push_back(it->second);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

bool MergeCandidate::operator==(const MergeCandidate& o) const {
  return kind == o.kind && nodes == o.nodes && (kind == Kind::adjacency || spec == o.spec);
}

ContractedGraph::ContractedGraph(const PartGraph& g) {
  std::map<int, int> node_of;
  for (const auto& p : g.parts) {
    const int n = tree_.add_leaf(p.id, p.box);
    active_.push_back(n);
    boxes_[n] = axis_aligned_hull<double>(std::vector<Obbd>{p.box});
    node_of[p.id] = n;
  }
  for (const auto& [a, b] : g.adjacency) {
    const int x = node_of.at(a), y = node_of.at(b);
    edges_.emplace(std::min(x, y), std::max(x, y));
  }
  const RelationTolerances tol;
  for (const auto& r : g.symmetries) {
    SymmetrySpecd spec = r.spec;
    if (std::any_of(library_.begin(), library_.end(),
                    [&](const SymmetryLibraryEntry& e) { return same_transform(e.spec, spec); })) {
      continue;
    }
    SymmetryLibraryEntry e{spec, {}};
    const auto t = symmetry_transform(spec, 1);
    for (const auto& p : g.parts) {
      int found = -1;
      for (const auto& q : g.parts) {
        if (congruent(p.box, q.box, tol.congruence) && maps_onto(p.box, q.box, t, tol.residual)) {
          found = q.id;
          break;
        }
      }
      e.image[p.id] = found;
    }
    library_.push_back(std::move(e));
  }
  detect_symmetries();
}

void ContractedGraph::detect_symmetries() {
  symmetries_.clear();
  std::map<std::vector<int>, int> by_parts;
  for (int n : active_) by_parts[tree_[n].parts] = n;
  auto node_for = [&](const std::vector<int>& parts) {
    if (parts.empty()) return -1;
    auto it = by_parts.find(parts);
    return it == by_parts.end() ? -1 : it->second;
  };
  std::set<std::vector<int>> seen;
  auto emit = [&](std::vector<int> orbit, const SymmetrySpecd& spec) {
    std::vector<int> key = orbit;
    std::sort(key.begin(), key.end());
    if (std::adjacent_find(key.begin(), key.end()) != key.end() || !seen.insert(key).second) return;
    symmetries_.push_back({MergeCandidate::Kind::symmetry, std::move(orbit), spec});
  };

  for (const auto& e : library_) {
    if (e.spec.kind == SymmetryKind::translational) {
      for (int v : active_) {
        // Chains start at a node with no predecessor.
        bool has_pred = false;
        for (int u : active_) has_pred = has_pred || (u != v && node_for(image_of(tree_[u].parts, e.image)) == v);
        if (has_pred) continue;
        std::vector<int> chain{v};
        for (int cur = v;;) {
          const int next = node_for(image_of(tree_[cur].parts, e.image));
          if (next < 0 || std::find(chain.begin(), chain.end(), next) != chain.end()) break;
          chain.push_back(next);
          cur = next;
        }
        if (chain.size() < 2 || static_cast<int>(chain.size()) > kMaxFold) continue;
        SymmetrySpecd spec = e.spec;
        spec.fold = static_cast<int>(chain.size());
        spec.point = boxes_.at(v).center;
        emit(std::move(chain), spec);
      }
      continue;
    }
    for (int v : active_) {
      std::vector<int> orbit{v};
      std::vector<int> parts = tree_[v].parts;
      bool ok = true;
      for (int j = 1; j < e.spec.fold && ok; ++j) {
        parts = image_of(parts, e.image);
        const int u = node_for(parts);
        ok = u >= 0 && u != v;
        orbit.push_back(u);
      }
      // The orbit must close on itself.
      ok = ok && image_of(parts, e.image) == tree_[v].parts;
      if (!ok) continue;
      // Generator: lexicographically smallest box center; rotate the orbit so
      // that it comes first.
      auto gen = std::min_element(orbit.begin(), orbit.end(), [&](int a, int b) {
        return lexicographic_less(boxes_.at(a).center, boxes_.at(b).center);
      });
      std::rotate(orbit.begin(), gen, orbit.end());
      emit(std::move(orbit), e.spec);
    }
  }
}

int ContractedGraph::merge(const MergeCandidate& c) {
  for (int n : c.nodes) {
    if (std::find(active_.begin(), active_.end(), n) == active_.end()) {
      throw std::invalid_argument("merge candidate refers to node " + std::to_string(n) + " which is not current");
    }
  }
  int merged = -1;
  if (c.kind == MergeCandidate::Kind::adjacency) {
    if (c.nodes.size() != 2 || !edges_.count({std::min(c.nodes[0], c.nodes[1]), std::max(c.nodes[0], c.nodes[1])})) {
      throw std::invalid_argument("adjacency candidate is not an edge");
    }
    int a = c.nodes[0], b = c.nodes[1];
    // Canonical child order: lexicographic by subtree box center.
    if (lexicographic_less(boxes_.at(b).center, boxes_.at(a).center)) std::swap(a, b);
    merged = tree_.add_adjacency(a, b);
  } else {
    if (std::find(symmetries_.begin(), symmetries_.end(), c) == symmetries_.end()) {
      throw std::invalid_argument("symmetry candidate is not a current relation");
    }
    merged = tree_.add_symmetry(c.nodes.front(), c.spec);
    auto& parts = tree_[merged].parts;
    for (std::size_t i = 1; i < c.nodes.size(); ++i) {
      parts.insert(parts.end(), tree_[c.nodes[i]].parts.begin(), tree_[c.nodes[i]].parts.end());
    }
    std::sort(parts.begin(), parts.end());
  }
  std::vector<Obbd> member_boxes;
  for (int n : c.nodes) member_boxes.push_back(boxes_.at(n));
  boxes_[merged] = axis_aligned_hull<double>(member_boxes);

  const std::set<int> gone(c.nodes.begin(), c.nodes.end());
  std::set<std::pair<int, int>> edges;
  for (auto [a, b] : edges_) {
    if (gone.count(a)) a = merged;
    if (gone.count(b)) b = merged;
    if (a != b) edges.emplace(std::min(a, b), std::max(a, b));
  }
  edges_ = std::move(edges);
  std::erase_if(active_, [&](int n) { return gone.count(n) > 0; });
  active_.push_back(merged);
  detect_symmetries();
  return merged;
}

Hierarchy ContractedGraph::hierarchy() const {
  if (active_.size() != 1) throw std::logic_error("hierarchy requested before merging finished");
  return extract_subtree(tree_, active_.front());
}

std::vector<MergeCandidate> mergeable_candidates(const ContractedGraph& g) {
  std::vector<MergeCandidate> out;
  for (const auto& [a, b] : g.edges()) out.push_back({MergeCandidate::Kind::adjacency, {a, b}, {}});
  out.insert(out.end(), g.symmetries().begin(), g.symmetries().end());
  return out;
}

ContractedGraph contract(const ContractedGraph& g, const MergeCandidate& c) {
  ContractedGraph out = g;
  out.merge(c);
  return out;
}

Hierarchy sample_hierarchy(const PartGraph& g, Rng& rng, std::vector<MergeCandidate>* trail) {
  if (g.parts.empty()) throw GraphInvariantError("cannot sample a hierarchy of an empty graph");
  ContractedGraph cg(g);
  if (trail) trail->clear();
  while (cg.size() > 1) {
    const auto cands = mergeable_candidates(cg);
    if (cands.empty()) {
      throw GraphInvariantError("no mergeable candidates with " + std::to_string(cg.size()) +
                                " nodes left; the part graph is disconnected");
    }
    const auto& pick = cands[static_cast<std::size_t>(rng() % cands.size())];
    if (trail) trail->push_back(pick);
    cg.merge(pick);
  }
  return cg.hierarchy();
}

std::vector<Hierarchy> training_hierarchies(const PartGraph& g, int count, Rng& rng) {
  if (count < 0) throw std::invalid_argument("count must be non-negative");
  std::vector<Hierarchy> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(sample_hierarchy(g, rng));
  return out;
}

std::vector<Hierarchy> training_hierarchies(const ShapeRecord& shape, int count, Rng& rng) {
  return training_hierarchies(shape.graph, count, rng);
}

}  // namespace grass
