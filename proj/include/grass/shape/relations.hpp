#pragma once

#include "grass/shape/part_graph.hpp"

#include <optional>
#include <vector>

namespace grass {

struct RelationTolerances {
  // 2% of the unit bounding sphere's diameter.
  double adjacency = 0.04;
  double congruence = 1e-3;
  // Max corner error of a fitted transform, relative to the box diagonal.
  double residual = 1e-3;
};

// Canonical geometric form: unit directions with a positive leading
// component, plane and axis points closest to the origin.
SymmetrySpecd canonicalize(const SymmetrySpecd& s);

// Ordered member indices (into `boxes`) for a group, generator first.
struct SymmetryFit {
  std::vector<int> members;
  SymmetrySpecd spec;
};

// Each fit uses every given box. The generator is the box with the
// lexicographically smallest center.
std::optional<SymmetryFit> fit_rotational(const std::vector<Obbd>& boxes, double residual);
std::optional<SymmetryFit> fit_translational(const std::vector<Obbd>& boxes, double residual);
std::optional<SymmetryFit> fit_reflective(const Obbd& a, const Obbd& b, double residual);

// True when the transform maps `from` onto `to` within the residual.
bool maps_onto(const Obbd& from, const Obbd& to, const Eigen::Affine3d& t, double residual);

// Builds the relation graph of a segmented shape. Congruent parts are tested
// as a whole group for rotational then translational symmetry; otherwise
// they are split into reflective pairs, preferring the plane that pairs the
// most parts. Throws GraphInvariantError if the result is disconnected.
PartGraph detect_relations(const std::vector<Part>& parts, const RelationTolerances& tol = {});
PartGraph detect_relations(const std::vector<Obbd>& boxes, const RelationTolerances& tol = {});

}  // namespace grass
