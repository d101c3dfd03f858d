#pragma once

#include "grass/shape/obb.hpp"
#include "grass/shape/symmetry.hpp"

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace grass {

class GraphInvariantError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Part {
  int id = 0;
  std::string label;
  Obbd box;

  bool operator==(const Part&) const = default;
};

// members[j] is the image of the generator under the j-th group transform,
// so members.front() == generator.
struct SymmetryRelation {
  std::vector<int> members;
  int generator = 0;
  SymmetrySpecd spec;

  bool operator==(const SymmetryRelation&) const = default;
};

struct PartGraph {
  std::vector<Part> parts;
  std::vector<std::pair<int, int>> adjacency;
  std::vector<SymmetryRelation> symmetries;

  int index_of(int part_id) const;
  const Part& part(int part_id) const { return parts.at(static_cast<std::size_t>(index_of(part_id))); }
  std::vector<Obbd> boxes() const;

  bool operator==(const PartGraph&) const = default;
};

// Edges are stored with the smaller id first, sorted, without duplicates.
void normalize_edges(std::vector<std::pair<int, int>>& edges);

// Connectivity of the union of adjacency edges and symmetry memberships.
bool is_connected(const PartGraph& g);

// Throws GraphInvariantError describing the first violated invariant.
void validate(const PartGraph& g, bool require_connected = true);

}  // namespace grass
