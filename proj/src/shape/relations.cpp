#include "grass/shape/relations.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <numeric>

namespace grass {

namespace {

Vec3d positive_leading(Vec3d d) {
  for (int i = 0; i < 3; ++i) {
    if (std::abs(d[i]) > 1e-12) {
      if (d[i] < 0) d = -d;
      break;
    }
  }
  return d;
}

int lexicographic_first(const std::vector<Obbd>& boxes, const std::vector<int>& idx) {
  int best = idx.front();
  for (int i : idx) {
    if (lexicographic_less(boxes[i].center, boxes[best].center)) best = i;
  }
  return best;
}

// Orders `boxes` as the orbit of the lexicographically first box under the
// spec's group, or fails if some image has no match.
std::optional<SymmetryFit> orbit_fit(const std::vector<Obbd>& boxes, const SymmetrySpecd& spec,
                                     double residual) {
  std::vector<int> all(boxes.size());
  std::iota(all.begin(), all.end(), 0);
  const int gen = lexicographic_first(boxes, all);
  SymmetryFit fit{{gen}, spec};
  std::vector<bool> used(boxes.size(), false);
  used[gen] = true;
  for (int j = 1; j < spec.fold; ++j) {
    const auto t = symmetry_transform(spec, j);
    int found = -1;
    for (int m : all) {
      if (!used[m] && maps_onto(boxes[gen], boxes[m], t, residual)) {
        found = m;
        break;
      }
    }
    if (found < 0) return std::nullopt;
    used[found] = true;
    fit.members.push_back(found);
  }
  return fit;
}

}  // namespace

SymmetrySpecd canonicalize(const SymmetrySpecd& s) {
  SymmetrySpecd out = s;
  switch (s.kind) {
    case SymmetryKind::reflective:
      out.fold = 2;
      out.direction = positive_leading(s.direction.normalized());
      out.point = out.direction * s.point.dot(out.direction);
      break;
    case SymmetryKind::rotational:
      out.direction = positive_leading(s.direction.normalized());
      out.point = s.point - out.direction * s.point.dot(out.direction);
      break;
    case SymmetryKind::translational:
      break;
  }
  return out;
}

bool maps_onto(const Obbd& from, const Obbd& to, const Eigen::Affine3d& t, double residual) {
  const double tol = residual * std::max(from.diagonal(), 1e-9);
  return corner_set_distance(transform_obb(from, t), to) <= tol;
}

std::optional<SymmetryFit> fit_rotational(const std::vector<Obbd>& boxes, double residual) {
  const int k = static_cast<int>(boxes.size());
  if (k < 3 || k > kMaxFold) return std::nullopt;
  Eigen::MatrixXd pts(k, 3);
  for (int i = 0; i < k; ++i) pts.row(i) = boxes[i].center.transpose();
  const Vec3d c = pts.colwise().mean().transpose();
  pts.rowwise() -= c.transpose();
  const double tol = residual * std::max(boxes.front().diagonal(), 1e-9);
  const double r0 = pts.row(0).norm();
  if (r0 <= tol) return std::nullopt;
  for (int i = 1; i < k; ++i) {
    if (std::abs(pts.row(i).norm() - r0) > tol) return std::nullopt;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(pts, Eigen::ComputeThinV);
  const Vec3d n = svd.matrixV().col(2);
  for (int i = 0; i < k; ++i) {
    if (std::abs(pts.row(i).dot(n)) > tol) return std::nullopt;
  }
  SymmetrySpecd spec;
  spec.kind = SymmetryKind::rotational;
  spec.fold = k;
  spec.point = c;
  spec.direction = n;
  return orbit_fit(boxes, canonicalize(spec), residual);
}

std::optional<SymmetryFit> fit_translational(const std::vector<Obbd>& boxes, double residual) {
  const int k = static_cast<int>(boxes.size());
  if (k < 2 || k > kMaxFold) return std::nullopt;
  std::vector<int> all(boxes.size());
  std::iota(all.begin(), all.end(), 0);
  const int gen = lexicographic_first(boxes, all);
  int nearest = -1;
  for (int i : all) {
    if (i == gen) continue;
    if (nearest < 0 || (boxes[i].center - boxes[gen].center).norm() <
                           (boxes[nearest].center - boxes[gen].center).norm()) {
      nearest = i;
    }
  }
  SymmetrySpecd spec;
  spec.kind = SymmetryKind::translational;
  spec.fold = k;
  spec.point = boxes[gen].center;
  spec.direction = boxes[nearest].center - boxes[gen].center;
  if (spec.direction.norm() < 1e-9) return std::nullopt;
  return orbit_fit(boxes, spec, residual);
}

std::optional<SymmetryFit> fit_reflective(const Obbd& a, const Obbd& b, double residual) {
  const Vec3d d = b.center - a.center;
  if (d.norm() < 1e-9) return std::nullopt;
  SymmetrySpecd spec;
  spec.kind = SymmetryKind::reflective;
  spec.fold = 2;
  spec.point = (a.center + b.center) / 2;
  spec.direction = d.normalized();
  return orbit_fit({a, b}, canonicalize(spec), residual);
}

PartGraph detect_relations(const std::vector<Part>& parts, const RelationTolerances& tol) {
  PartGraph g;
  g.parts = parts;
  const int n = static_cast<int>(parts.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (adjacency_test(parts[i].box, parts[j].box, tol.adjacency)) g.adjacency.emplace_back(parts[i].id, parts[j].id);
    }
  }
  normalize_edges(g.adjacency);

  std::vector<std::vector<int>> classes;
  for (int i = 0; i < n; ++i) {
    bool placed = false;
    for (auto& c : classes) {
      if (congruent(parts[c.front()].box, parts[i].box, tol.congruence)) {
        c.push_back(i);
        placed = true;
        break;
      }
    }
    if (!placed) classes.push_back({i});
  }

  auto emit = [&](const std::vector<int>& idx, const SymmetryFit& fit) {
    SymmetryRelation r;
    for (int m : fit.members) r.members.push_back(parts[idx[m]].id);
    r.generator = r.members.front();
    r.spec = fit.spec;
    g.symmetries.push_back(std::move(r));
  };
  auto boxes_of = [&](const std::vector<int>& idx) {
    std::vector<Obbd> out;
    for (int i : idx) out.push_back(parts[i].box);
    return out;
  };

  for (const auto& cls : classes) {
    if (cls.size() < 2) continue;
    const auto boxes = boxes_of(cls);
    if (cls.size() >= 3) {
      if (auto fit = fit_rotational(boxes, tol.residual)) {
        emit(cls, *fit);
        continue;
      }
      if (auto fit = fit_translational(boxes, tol.residual)) {
        emit(cls, *fit);
        continue;
      }
    }

    // Reflective pairing, one plane at a time.
    std::vector<int> rest = cls;
    while (rest.size() >= 2) {
      struct Plane {
        SymmetrySpecd spec;
        std::vector<std::pair<int, int>> pairs;
      };
      std::vector<Plane> planes;
      for (std::size_t a = 0; a < rest.size(); ++a) {
        for (std::size_t b = a + 1; b < rest.size(); ++b) {
          auto fit = fit_reflective(parts[rest[a]].box, parts[rest[b]].box, tol.residual);
          if (!fit) continue;
          const int ga = fit->members.front() == 0 ? rest[a] : rest[b];
          const int gb = ga == rest[a] ? rest[b] : rest[a];
          auto it = std::find_if(planes.begin(), planes.end(),
                                 [&](const Plane& p) { return equivalent(p.spec, fit->spec, 1e-6); });
          if (it == planes.end()) {
            planes.push_back({fit->spec, {}});
            it = std::prev(planes.end());
          }
          const bool taken = std::any_of(it->pairs.begin(), it->pairs.end(), [&](const auto& p) {
            return p.first == ga || p.second == ga || p.first == gb || p.second == gb;
          });
          if (!taken) it->pairs.emplace_back(ga, gb);
        }
      }
      if (planes.empty()) break;
      const auto best = std::max_element(planes.begin(), planes.end(), [](const Plane& x, const Plane& y) {
        return x.pairs.size() < y.pairs.size();
      });
      for (const auto& [a, b] : best->pairs) {
        g.symmetries.push_back({{parts[a].id, parts[b].id}, parts[a].id, best->spec});
        std::erase(rest, a);
        std::erase(rest, b);
      }
    }
    if (rest.size() == 2 && cls.size() == 2) {
      if (auto fit = fit_translational(boxes_of(rest), tol.residual)) emit(rest, *fit);
    }
  }
  validate(g);
  return g;
}

PartGraph detect_relations(const std::vector<Obbd>& boxes, const RelationTolerances& tol) {
  std::vector<Part> parts;
  for (std::size_t i = 0; i < boxes.size(); ++i) parts.push_back({static_cast<int>(i), "", boxes[i]});
  return detect_relations(parts, tol);
}

}  // namespace grass
