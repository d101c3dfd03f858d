#include "grass/data/generator.hpp"

#include "grass/core/random.hpp"
#include "grass/shape/relations.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

namespace grass {

namespace {

constexpr double kPi = std::numbers::pi;

Obbd make_box(Vec3d center, Vec3d dims, Vec3d axis1 = Vec3d::UnitX(), Vec3d axis2 = Vec3d::UnitY()) {
  Obbd b;
  b.center = center;
  b.dims = dims;
  b.axis1 = axis1.normalized();
  b.axis2 = (axis2 - axis2.dot(b.axis1) * b.axis1).normalized();
  return b;
}

class Builder {
 public:
  int add(const std::string& label, const Obbd& box, PartStyle style) {
    const int id = static_cast<int>(rec_.graph.parts.size());
    rec_.graph.parts.push_back({id, label, box});
    rec_.styles.push_back(style);
    return id;
  }

  void group(std::vector<int> ids, SymmetryKind kind) { groups_.push_back({std::move(ids), kind}); }

  ShapeRecord finish(const std::string& id, const std::string& category, const std::string& subclass) {
    rec_.id = id;
    rec_.category = category;
    rec_.subclass = subclass;
    normalize_to_unit_sphere(rec_.graph);
    auto& g = rec_.graph;
    const RelationTolerances tol;
    for (std::size_t i = 0; i < g.parts.size(); ++i) {
      for (std::size_t j = i + 1; j < g.parts.size(); ++j) {
        if (adjacency_test(g.parts[i].box, g.parts[j].box, tol.adjacency)) g.adjacency.emplace_back(int(i), int(j));
      }
    }
    for (const auto& [ids, kind] : groups_) {
      std::vector<Obbd> boxes;
      for (int i : ids) boxes.push_back(g.parts[i].box);
      std::optional<SymmetryFit> fit;
      switch (kind) {
        case SymmetryKind::reflective:
          fit = fit_reflective(boxes[0], boxes[1], tol.residual);
          break;
        case SymmetryKind::rotational:
          fit = fit_rotational(boxes, tol.residual);
          break;
        case SymmetryKind::translational:
          fit = fit_translational(boxes, tol.residual);
          break;
      }
      if (!fit) throw std::logic_error("generated symmetry group does not fit its kind");
      SymmetryRelation r;
      for (int m : fit->members) r.members.push_back(ids[m]);
      r.generator = r.members.front();
      r.spec = fit->spec;
      g.symmetries.push_back(std::move(r));
    }
    validate(g);
    return rec_;
  }

 private:
  ShapeRecord rec_;
  std::vector<std::pair<std::vector<int>, SymmetryKind>> groups_;
};

// Four legs under a w x d footprint whose top is at height h. Square
// footprints form a rotational group, others two mirror pairs.
void add_legs(Builder& b, Rng& rng, double w, double d, double h, double lt, bool square, PartStyle style,
              const std::string& label) {
  const double inset = uniform(rng, 0.0, 0.05);
  const double x = w / 2 - inset - lt / 2;
  const double z = d / 2 - inset - lt / 2;
  std::vector<int> legs;
  for (double sz : {-1.0, 1.0}) {
    for (double sx : {-1.0, 1.0}) legs.push_back(b.add(label, make_box({sx * x, h / 2, sz * z}, {lt, h, lt}), style));
  }
  if (square) {
    b.group(legs, SymmetryKind::rotational);
  } else {
    b.group({legs[0], legs[1]}, SymmetryKind::reflective);
    b.group({legs[2], legs[3]}, SymmetryKind::reflective);
  }
}

// Inner radius for k radial members of the given thickness so that
// neighbours stay clear of each other by more than the adjacency tolerance
// after normalization. Never less than `core_half` plus a small gap.
double hub_radius(int k, double thickness, double core_half) {
  const double spread = (thickness + 0.06) / (2 * std::sin(kPi / k)) + thickness / 2;
  return std::max(core_half + 0.01, spread);
}

// k radial members around the y axis; each is a box of the given dims whose
// axis1 points outward, centered at radius r and height y.
std::vector<int> add_radial(Builder& b, int k, double phase, double r, double y, Vec3d dims, double tilt,
                            PartStyle style, const std::string& label) {
  std::vector<int> ids;
  for (int j = 0; j < k; ++j) {
    const double t = phase + 2 * kPi * j / k;
    const Vec3d radial(std::cos(t), 0, std::sin(t));
    const Vec3d axis1 = std::cos(tilt) * radial + std::sin(tilt) * Vec3d::UnitY();
    const Vec3d axis2 = -std::sin(tilt) * radial + std::cos(tilt) * Vec3d::UnitY();
    const Vec3d center = radial * r + Vec3d::UnitY() * y;
    ids.push_back(b.add(label, make_box(center, dims, axis1, axis2), style));
  }
  return ids;
}

ShapeRecord chair(const std::string& subclass, Rng& rng, const std::string& id) {
  Builder b;
  const double w = uniform(rng, 0.8, 1.1);
  const bool swivel = subclass == "swivel";
  const bool square = subclass == "four-leg" && uniform01(rng) < 0.35;
  const double d = (square || swivel) ? w : uniform(rng, 0.75, 1.05);
  const double t = uniform(rng, 0.06, 0.1);
  const double h = uniform(rng, 0.75, 1.0);
  const double bh = uniform(rng, 0.7, 1.0);
  const double bt = uniform(rng, 0.05, 0.09);
  const PartStyle seat_style = swivel ? PartStyle::ellipsoid : PartStyle::solid;
  b.add("seat", make_box({0, h + t / 2, 0}, {w, t, d}), seat_style);

  const bool slats = subclass == "four-leg" && uniform01(rng) < 0.4;
  if (slats) {
    const double rh = uniform(rng, 0.1, 0.18);
    const int k = uniform_int(rng, 3, 5);
    const double sw = uniform(rng, 0.04, 0.06);
    b.add("back", make_box({0, h + t + bh - rh / 2, -d / 2 + bt / 2}, {w, rh, bt}), PartStyle::cylinder);
    std::vector<int> ids;
    for (int j = 0; j < k; ++j) {
      const double x = -w / 2 + (j + 1) * w / (k + 1);
      ids.push_back(b.add("back", make_box({x, h + t + (bh - rh) / 2, -d / 2 + bt / 2}, {sw, bh - rh, bt}),
                          PartStyle::solid));
    }
    b.group(ids, SymmetryKind::translational);
  } else {
    const PartStyle style = subclass == "armchair" ? PartStyle::shell
                            : swivel               ? PartStyle::ellipsoid
                                                   : PartStyle::solid;
    b.add("back", make_box({0, h + t + bh / 2, -d / 2 + bt / 2}, {w, bh, bt}), style);
  }

  if (swivel) {
    const int k = uniform_int(rng, 4, 6);
    double c = uniform(rng, 0.1, 0.14);
    const double wh = uniform(rng, 0.06, 0.09);
    const double st = uniform(rng, 0.04, 0.06);
    const double len = uniform(rng, 0.3, 0.42);
    const double phase = uniform(rng, 0.0, 2 * kPi / k);
    const double r0 = hub_radius(k, 0.045, c / 2);
    c = std::max(c, 2 * (r0 - 0.01));
    b.add("base", make_box({0, (wh + h) / 2, 0}, {c, h - wh, c}), PartStyle::cylinder);
    const auto spokes =
        add_radial(b, k, phase, r0 + len / 2, wh + st / 2, {len, st, 0.035}, 0.0, PartStyle::solid, "base");
    const double wd = 0.07;
    const auto wheels = add_radial(b, k, phase, r0 + len - wd / 2, wh / 2, {wd, wh, 0.045}, 0.0,
                                   PartStyle::ellipsoid, "base");
    b.group(spokes, SymmetryKind::rotational);
    b.group(wheels, SymmetryKind::rotational);
  } else {
    const double lt = uniform(rng, 0.06, 0.1);
    add_legs(b, rng, w, d, h, lt, square, subclass == "armchair" ? PartStyle::solid : PartStyle::cylinder, "leg");
  }

  if (subclass == "armchair") {
    const double ah = uniform(rng, 0.2, 0.3);
    const double aw = uniform(rng, 0.06, 0.1);
    const double at = uniform(rng, 0.05, 0.08);
    const double as = uniform(rng, 0.04, 0.07);
    const double len = d - bt;
    std::vector<int> arms, supports;
    for (double sx : {-1.0, 1.0}) {
      supports.push_back(b.add("arm", make_box({sx * (w / 2 - aw / 2), h + t + ah / 2, d / 2 - as / 2 - 0.02},
                                               {as, ah, as}),
                               PartStyle::cylinder));
      arms.push_back(b.add("arm", make_box({sx * (w / 2 - aw / 2), h + t + ah + at / 2, -d / 2 + bt + len / 2},
                                           {aw, at, len}),
                           PartStyle::ellipsoid));
    }
    b.group(supports, SymmetryKind::reflective);
    b.group(arms, SymmetryKind::reflective);
  }
  return b.finish(id, "chair", subclass);
}

ShapeRecord table(const std::string& subclass, Rng& rng, const std::string& id) {
  Builder b;
  const double w = uniform(rng, 1.0, 1.5);
  const bool pedestal = subclass == "pedestal";
  const bool square = !pedestal && uniform01(rng) < 0.3;
  const double d = (square || pedestal) ? w : uniform(rng, 0.6, 1.0);
  const double t = uniform(rng, 0.05, 0.09);
  const double h = uniform(rng, 0.6, 0.85);
  b.add("top", make_box({0, h + t / 2, 0}, {w, t, d}), PartStyle::solid);
  if (pedestal) {
    const int k = uniform_int(rng, 3, 5);
    double c = uniform(rng, 0.12, 0.18);
    const double fh = uniform(rng, 0.05, 0.08);
    const double len = uniform(rng, 0.3, 0.45);
    const double r0 = hub_radius(k, 0.05, c / 2);
    c = std::max(c, 2 * (r0 - 0.01));
    b.add("base", make_box({0, (h + fh) / 2, 0}, {c, h - fh, c}), PartStyle::cylinder);
    const auto feet = add_radial(b, k, uniform(rng, 0.0, 2 * kPi / k), r0 + len / 2, fh / 2,
                                 {len, fh, 0.05}, 0.0, PartStyle::solid, "base");
    b.group(feet, SymmetryKind::rotational);
  } else {
    add_legs(b, rng, w, d, h, uniform(rng, 0.06, 0.1), square, PartStyle::cylinder, "leg");
  }
  return b.finish(id, "table", subclass);
}

ShapeRecord candelabrum(Rng& rng, const std::string& id, int k) {
  Builder b;
  const double bw = uniform(rng, 0.4, 0.6);
  const double bh = uniform(rng, 0.05, 0.1);
  double s = uniform(rng, 0.1, 0.14);
  const double sh = uniform(rng, 0.8, 1.2);
  const double cs = uniform(rng, 0.05, 0.08);
  const double ch = uniform(rng, 0.2, 0.35);
  b.add("base", make_box({0, bh / 2, 0}, {bw, bh, bw}), PartStyle::ellipsoid);
  const double len = uniform(rng, 0.35, 0.55);
  const double at = uniform(rng, 0.035, 0.05);
  const double tilt = uniform(rng, 0.0, 0.4);
  const double y = bh + sh * uniform(rng, 0.55, 0.8);
  const double r0 = hub_radius(k, at, s / 2);
  s = std::max(s, 2 * (r0 - 0.01));
  b.add("stem", make_box({0, bh + sh / 2, 0}, {s, sh, s}), PartStyle::cylinder);
  b.add("candle", make_box({0, bh + sh + ch / 2, 0}, {cs, ch, cs}), PartStyle::cylinder);
  const double r = r0 + std::cos(tilt) * len / 2;
  const auto arms = add_radial(b, k, uniform(rng, 0.0, 2 * kPi / k), r, y + std::sin(tilt) * len / 2,
                               {len, at, at}, tilt, PartStyle::cylinder, "arm");
  b.group(arms, SymmetryKind::rotational);
  return b.finish(id, "candelabrum", "arms-" + std::to_string(k));
}

std::uint64_t category_stream(const std::string& category) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : category) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
  return h;
}

}  // namespace

const std::vector<std::string>& category_subclasses(const std::string& category) {
  static const std::map<std::string, std::vector<std::string>> sub{
      {"chair", {"four-leg", "swivel", "armchair"}},
      {"table", {"four-leg", "pedestal"}},
      {"candelabrum", {"arms-3", "arms-4", "arms-5", "arms-6", "arms-7"}}};
  auto it = sub.find(category);
  if (it == sub.end()) throw std::invalid_argument("unknown category '" + category + "'");
  return it->second;
}

ShapeRecord generate_shape(const std::string& category, const std::string& subclass, std::uint64_t seed) {
  Rng rng(seed);
  const std::string id = category + "-" + subclass + "-" + std::to_string(seed);
  if (category == "chair") return chair(subclass, rng, id);
  if (category == "table") return table(subclass, rng, id);
  if (category == "candelabrum") {
    if (subclass.rfind("arms-", 0) != 0) throw std::invalid_argument("candelabrum subclass must be arms-<k>");
    return candelabrum(rng, id, std::stoi(subclass.substr(5)));
  }
  throw std::invalid_argument("unknown category '" + category + "'");
}

std::vector<ShapeRecord> generate_shapes(const std::string& category, int count, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("count must be at least 1");
  const auto& subs = category_subclasses(category);
  std::vector<ShapeRecord> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const std::uint64_t s = derive_seed(seed ^ category_stream(category), static_cast<std::uint64_t>(i));
    std::string sub;
    if (category == "candelabrum") {
      Rng pick(s);
      sub = subs[static_cast<std::size_t>(uniform_int(pick, 0, static_cast<int>(subs.size()) - 1))];
    } else {
      sub = subs[static_cast<std::size_t>(i) % subs.size()];
    }
    ShapeRecord r = generate_shape(category, sub, derive_seed(s, 1));
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s-%04d", category.c_str(), i);
    r.id = buf;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace grass
