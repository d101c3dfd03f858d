#pragma once

#include "grass/core/checkpoint.hpp"
#include "grass/shape/hierarchy.hpp"

#include <string>

namespace grass {

// Field-level readers throw FormatError naming the field path, e.g.
// "parts[2].obb.axis1".
Json vec3_to_json(const Vec3d& v);
Vec3d vec3_from_json(const Json& j, const std::string& path, const std::string& field);

Json obb_to_json(const Obbd& b);
Obbd obb_from_json(const Json& j, const std::string& path, const std::string& field);

Json symmetry_to_json(const SymmetrySpecd& s);
SymmetrySpecd symmetry_from_json(const Json& j, const std::string& path, const std::string& field);

// Nested {type: leaf|adj|sym, part?, obb?, sym?, children[]}.
Json hierarchy_to_json(const Hierarchy& h, bool with_codes = false);
Hierarchy hierarchy_from_json(const Json& j, const std::string& path = "<memory>");

const Json& require_field(const Json& j, const char* key, const std::string& path, const std::string& field);

}  // namespace grass
