#include "grass/shape/json.hpp"

#include <functional>

namespace grass {

const Json& require_field(const Json& j, const char* key, const std::string& path, const std::string& field) {
  if (!j.is_object() || !j.contains(key)) throw FormatError(path, field, "missing field");
  return j.at(key);
}

Json vec3_to_json(const Vec3d& v) { return Json::array({v.x(), v.y(), v.z()}); }

Vec3d vec3_from_json(const Json& j, const std::string& path, const std::string& field) {
  if (!j.is_array() || j.size() != 3) throw FormatError(path, field, "expected an array of 3 numbers");
  Vec3d v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw FormatError(path, field, "expected an array of 3 numbers");
    v[i] = j[i].get<double>();
  }
  return v;
}

Json obb_to_json(const Obbd& b) {
  return {{"center", vec3_to_json(b.center)},
          {"dims", vec3_to_json(b.dims)},
          {"axis1", vec3_to_json(b.axis1)},
          {"axis2", vec3_to_json(b.axis2)}};
}

Obbd obb_from_json(const Json& j, const std::string& path, const std::string& field) {
  Obbd b;
  b.center = vec3_from_json(require_field(j, "center", path, field + ".center"), path, field + ".center");
  b.dims = vec3_from_json(require_field(j, "dims", path, field + ".dims"), path, field + ".dims");
  b.axis1 = vec3_from_json(require_field(j, "axis1", path, field + ".axis1"), path, field + ".axis1");
  b.axis2 = vec3_from_json(require_field(j, "axis2", path, field + ".axis2"), path, field + ".axis2");
  if (!is_valid(b)) throw FormatError(path, field, "box violates OBB invariants");
  return b;
}

Json symmetry_to_json(const SymmetrySpecd& s) {
  return {{"kind", to_string(s.kind)},
          {"fold", s.fold},
          {"geom", {s.point.x(), s.point.y(), s.point.z(), s.direction.x(), s.direction.y(), s.direction.z()}}};
}

SymmetrySpecd symmetry_from_json(const Json& j, const std::string& path, const std::string& field) {
  SymmetrySpecd s;
  try {
    s.kind = symmetry_kind_from_string(require_field(j, "kind", path, field + ".kind").get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw FormatError(path, field + ".kind", e.what());
  }
  s.fold = require_field(j, "fold", path, field + ".fold").get<int>();
  const Json& g = require_field(j, "geom", path, field + ".geom");
  if (!g.is_array() || g.size() != 6) throw FormatError(path, field + ".geom", "expected 6 numbers");
  for (int i = 0; i < 3; ++i) {
    s.point[i] = g[i].get<double>();
    s.direction[i] = g[i + 3].get<double>();
  }
  if (!is_valid(s)) throw FormatError(path, field, "symmetry violates spec invariants");
  return s;
}

Json hierarchy_to_json(const Hierarchy& h, bool with_codes) {
  std::function<Json(int)> node = [&](int i) {
    const auto& n = h[i];
    Json j;
    j["type"] = to_string(n.type);
    j["parts"] = n.parts;
    if (n.type == NodeType::leaf) {
      j["part"] = n.part;
      j["obb"] = obb_to_json(n.box);
    }
    if (n.type == NodeType::symmetry) j["sym"] = symmetry_to_json(n.sym);
    Json children = Json::array();
    if (n.left >= 0) children.push_back(node(n.left));
    if (n.right >= 0) children.push_back(node(n.right));
    j["children"] = std::move(children);
    if (with_codes && n.code) j["code"] = std::vector<double>(n.code->data(), n.code->data() + n.code->size());
    return j;
  };
  if (h.empty()) return Json();
  return node(h.root());
}

Hierarchy hierarchy_from_json(const Json& j, const std::string& path) {
  Hierarchy h;
  std::function<int(const Json&, const std::string&)> node = [&](const Json& x, const std::string& field) -> int {
    const auto type = require_field(x, "type", path, field + ".type").get<std::string>();
    const Json& children = require_field(x, "children", path, field + ".children");
    int id = -1;
    if (type == "leaf") {
      if (!children.empty()) throw FormatError(path, field + ".children", "leaf with children");
      id = h.add_leaf(require_field(x, "part", path, field + ".part").get<int>(),
                      obb_from_json(require_field(x, "obb", path, field + ".obb"), path, field + ".obb"));
    } else if (type == "adj") {
      if (children.size() != 2) throw FormatError(path, field + ".children", "adjacency needs 2 children");
      const int l = node(children[0], field + ".children[0]");
      const int r = node(children[1], field + ".children[1]");
      id = h.add_adjacency(l, r);
    } else if (type == "sym") {
      if (children.size() != 1) throw FormatError(path, field + ".children", "symmetry needs 1 child");
      const int c = node(children[0], field + ".children[0]");
      id = h.add_symmetry(c, symmetry_from_json(require_field(x, "sym", path, field + ".sym"), path, field + ".sym"));
    } else {
      throw FormatError(path, field + ".type", "unknown node type '" + type + "'");
    }
    if (x.contains("parts")) h[id].parts = x.at("parts").get<std::vector<int>>();
    if (x.contains("code")) {
      const auto c = x.at("code").get<std::vector<double>>();
      h[id].code = Eigen::Map<const Vector>(c.data(), static_cast<Eigen::Index>(c.size()));
    }
    return id;
  };
  node(j, "root");
  return h;
}

}  // namespace grass
