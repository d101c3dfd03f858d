#pragma once

#include "grass/shape/part_graph.hpp"

#include <string>
#include <vector>

namespace grass {

// Synthetic solid that fills a part's box.
enum class PartStyle { solid, shell, cylinder, ellipsoid };

std::string to_string(PartStyle s);
PartStyle part_style_from_string(const std::string& s);

struct ShapeRecord {
  std::string id;
  std::string category;
  std::string subclass;
  PartGraph graph;
  // One per part, in graph.parts order.
  std::vector<PartStyle> styles;

  bool operator==(const ShapeRecord&) const = default;
};

// Fixed label vocabulary per category.
const std::vector<std::string>& category_labels(const std::string& category);

// Uniformly scales and translates so every box corner lies in the unit
// ball and the farthest corner from the center of the corner hull is on its
// boundary. Symmetry specs are transformed along.
void normalize_to_unit_sphere(PartGraph& g);

}  // namespace grass
