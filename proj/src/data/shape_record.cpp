#include "grass/data/shape_record.hpp"

#include "grass/shape/relations.hpp"

#include <limits>
#include <map>
#include <stdexcept>

namespace grass {

std::string to_string(PartStyle s) {
  switch (s) {
    case PartStyle::solid:
      return "solid";
    case PartStyle::shell:
      return "shell";
    case PartStyle::cylinder:
      return "cylinder";
    case PartStyle::ellipsoid:
      return "ellipsoid";
  }
  return "?";
}

PartStyle part_style_from_string(const std::string& s) {
  if (s == "solid") return PartStyle::solid;
  if (s == "shell") return PartStyle::shell;
  if (s == "cylinder") return PartStyle::cylinder;
  if (s == "ellipsoid") return PartStyle::ellipsoid;
  throw std::invalid_argument("unknown part style '" + s + "'");
}

const std::vector<std::string>& category_labels(const std::string& category) {
  static const std::map<std::string, std::vector<std::string>> labels{
      {"chair", {"seat", "back", "leg", "arm", "base"}},
      {"table", {"top", "leg", "base"}},
      {"candelabrum", {"base", "stem", "arm", "candle"}},
      {"fixture", {}}};
  auto it = labels.find(category);
  if (it == labels.end()) throw std::invalid_argument("unknown category '" + category + "'");
  return it->second;
}

void normalize_to_unit_sphere(PartGraph& g) {
  Vec3d lo = Vec3d::Constant(std::numeric_limits<double>::max());
  Vec3d hi = -lo;
  for (const auto& p : g.parts) {
    for (const auto& c : obb_corners(p.box)) {
      lo = lo.cwiseMin(c);
      hi = hi.cwiseMax(c);
    }
  }
  const Vec3d center = (lo + hi) / 2;
  double radius = 0.0;
  for (const auto& p : g.parts) {
    for (const auto& c : obb_corners(p.box)) radius = std::max(radius, (c - center).norm());
  }
  if (radius <= 0.0) return;
  const double s = 1.0 / radius;
  for (auto& p : g.parts) {
    p.box.center = (p.box.center - center) * s;
    p.box.dims *= s;
  }
  for (auto& r : g.symmetries) {
    r.spec.point = (r.spec.point - center) * s;
    if (r.spec.kind == SymmetryKind::translational) {
      r.spec.direction *= s;
    } else {
      r.spec = canonicalize(r.spec);
    }
  }
}

}  // namespace grass
