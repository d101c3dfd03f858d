#include "doctest.h"

#include "grass/shape/hierarchy.hpp"
#include "grass/shape/relations.hpp"

#include <random>

using namespace grass;

namespace {

Obbd box(Vec3d c, Vec3d d, Vec3d a1 = Vec3d::UnitX(), Vec3d a2 = Vec3d::UnitY()) {
  Obbd b;
  b.center = c;
  b.dims = d;
  b.axis1 = a1.normalized();
  b.axis2 = a2.normalized();
  return b;
}

Obbd random_box(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vec3d a1(u(rng), u(rng), u(rng));
  a1.normalize();
  Vec3d a2 = a1.unitOrthogonal();
  return box({u(rng), u(rng), u(rng)}, {0.1 + std::abs(u(rng)), 0.1 + std::abs(u(rng)), 0.1 + std::abs(u(rng))},
             a1, a2);
}

// Brute-force distance between two boxes by sampling their surfaces.
double sampled_distance(const Obbd& a, const Obbd& b, int n = 12) {
  auto samples = [n](const Obbd& o) {
    std::vector<Vec3d> pts;
    for (int i = 0; i <= n; ++i) {
      for (int j = 0; j <= n; ++j) {
        for (int k = 0; k <= n; ++k) {
          const Vec3d s(double(i) / n - 0.5, double(j) / n - 0.5, double(k) / n - 0.5);
          pts.push_back(o.center + o.rotation() * s.cwiseProduct(o.dims));
        }
      }
    }
    return pts;
  };
  double best = 1e300;
  for (const auto& p : samples(a)) {
    for (const auto& q : samples(b)) best = std::min(best, (p - q).norm());
  }
  return best;
}

bool same_point_set(const std::array<Vec3d, 8>& a, const std::array<Vec3d, 8>& b, double tol) {
  for (const auto& p : a) {
    bool found = false;
    for (const auto& q : b) found = found || (p - q).norm() <= tol;
    if (!found) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("obb vector codec") {
  Obbd unit;
  ObbVector v = obb_to_vec(unit);
  ObbVector expected;
  expected << 0, 0, 0, 1, 1, 1, 1, 0, 0, 0, 1, 0;
  CHECK(v == expected);

  std::mt19937_64 rng(1);
  for (int t = 0; t < 50; ++t) {
    const Obbd b = random_box(rng);
    const Obbd r = vec_to_obb(obb_to_vec(b));
    CHECK((obb_to_vec(r) - obb_to_vec(b)).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("decoding skewed axes agrees with a Gram-Schmidt oracle") {
  ObbVector v;
  const double s = 0.05;
  v << 0.1, 0.2, 0.3, 0.5, 0.4, 0.3, 1, 0, 0, s, std::sqrt(1 - s * s), 0;
  const Obbd b = vec_to_obb(v);
  CHECK(std::abs(b.axis1.dot(b.axis2)) < 1e-12);
  // Oracle: classical Gram-Schmidt on (a1, a2).
  Vec3d a1(1, 0, 0), a2(s, std::sqrt(1 - s * s), 0);
  Vec3d e1 = a1 / a1.norm();
  Vec3d e2 = a2 - (a2.dot(e1)) * e1;
  e2 /= e2.norm();
  Obbd oracle = box({0.1, 0.2, 0.3}, {0.5, 0.4, 0.3}, e1, e2);
  const auto cb = obb_corners(b), co = obb_corners(oracle);
  for (int i = 0; i < 8; ++i) CHECK((cb[i] - co[i]).norm() < 1e-9);

  ObbVector zero = ObbVector::Zero();
  const Obbd z = vec_to_obb(zero);
  CHECK(is_valid(z));
  CHECK(z.dims.minCoeff() >= kMinDim);
}

TEST_CASE("corners") {
  const auto c = obb_corners(Obbd{});
  for (const auto& p : c) CHECK(p.cwiseAbs().isApprox(Vec3d::Constant(0.5)));

  const Obbd b = box({0.3, -0.2, 0.1}, {0.4, 0.8, 0.2});
  const Obbd r = box({0.3, -0.2, 0.1}, {0.4, 0.8, 0.2}, Vec3d::UnitY(), -Vec3d::UnitX());
  // Oracle: rotate the unrotated corners by 90 degrees about z around the center.
  Eigen::Matrix3d rz;
  rz << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  std::array<Vec3d, 8> rotated;
  const auto base = obb_corners(b);
  for (int i = 0; i < 8; ++i) rotated[i] = b.center + rz * (base[i] - b.center);
  CHECK(same_point_set(obb_corners(r), rotated, 1e-12));

  const Obbd tiny = box({1, 1, 1}, Vec3d::Constant(1e-12));
  for (const auto& p : obb_corners(tiny)) CHECK((p - Vec3d(1, 1, 1)).norm() < 1e-11);
}

TEST_CASE("adjacency test against a sampling oracle") {
  const Obbd a = box({0, 0, 0}, {1, 1, 1});
  const Obbd touching = box({1, 0, 0}, {1, 1, 1});
  CHECK(sampled_distance(a, touching) <= 0.02);
  CHECK(adjacency_test(a, touching, 0.02));
  CHECK_FALSE(adjacency_test(a, box({3, 0, 0}, {1, 1, 1}), 0.02));
  CHECK(adjacency_test(a, box({0.3, 0.2, 0}, {1, 1, 1}), 0.0));

  std::mt19937_64 rng(8);
  for (int t = 0; t < 20; ++t) {
    const Obbd p = random_box(rng), q = random_box(rng);
    // The separating-axis gap is a lower bound of the true distance.
    CHECK(obb_separation(p, q) <= sampled_distance(p, q, 8) + 1e-9);
  }
}

TEST_CASE("apply symmetry") {
  SymmetrySpecd t{SymmetryKind::translational, 3, Vec3d::Zero(), Vec3d(1, 0, 0)};
  const auto tr = apply_symmetry(box({0, 0, 0}, {0.2, 0.3, 0.4}), t);
  REQUIRE(tr.size() == 3);
  CHECK(tr[1].center.isApprox(Vec3d(1, 0, 0)));
  CHECK(tr[2].center.isApprox(Vec3d(2, 0, 0)));

  const Obbd g = box({1, 0, 0}, {0.2, 0.5, 0.3}, Vec3d(1, 1, 0), Vec3d(-1, 1, 0));
  SymmetrySpecd refl{SymmetryKind::reflective, 2, Vec3d::Zero(), Vec3d::UnitX()};
  const auto rf = apply_symmetry(g, refl);
  CHECK(rf[1].center.isApprox(Vec3d(-1, 0, 0)));
  std::array<Vec3d, 8> mirrored;
  const auto gc = obb_corners(g);
  for (int i = 0; i < 8; ++i) mirrored[i] = Vec3d(-gc[i].x(), gc[i].y(), gc[i].z());
  CHECK(same_point_set(obb_corners(rf[1]), mirrored, 1e-12));

  SymmetrySpecd rot{SymmetryKind::rotational, 4, Vec3d::Zero(), Vec3d::UnitZ()};
  const auto rt = apply_symmetry(box({1, 0, 0}, {0.1, 0.1, 0.1}), rot);
  const Vec3d expected[4] = {{1, 0, 0}, {0, 1, 0}, {-1, 0, 0}, {0, -1, 0}};
  for (int j = 0; j < 4; ++j) {
    // Oracle: explicit rotation matrix for angle j*pi/2.
    const double a = j * M_PI / 2;
    Eigen::Matrix3d m;
    m << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
    CHECK((rt[j].center - m * Vec3d(1, 0, 0)).norm() < 1e-12);
    CHECK((rt[j].center - expected[j]).norm() < 1e-12);
  }
}

TEST_CASE("symmetry invariants over random specs") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int t = 0; t < 30; ++t) {
    const Obbd g = random_box(rng);
    SymmetrySpecd s;
    s.kind = static_cast<SymmetryKind>(t % 3);
    s.fold = s.kind == SymmetryKind::reflective ? 2 : 2 + t % 6;
    s.point = Vec3d(u(rng), u(rng), u(rng));
    s.direction = Vec3d(u(rng), u(rng), u(rng));
    if (s.kind != SymmetryKind::translational) s.direction.normalize();
    const auto members = apply_symmetry(g, s);
    CHECK(static_cast<int>(members.size()) == s.fold);
    for (const auto& m : members) CHECK(congruent(m, g, 1e-6));
    if (s.kind == SymmetryKind::reflective) {
      const Obbd back = transform_obb(members[1], symmetry_transform(s, 1));
      CHECK(corner_set_distance(back, g) < 1e-9);
    }
  }
}

TEST_CASE("symmetry vector codec") {
  SymmetrySpecd r{SymmetryKind::reflective, 2, Vec3d(0.1, 0, 0), Vec3d::UnitX()};
  CHECK(vec_to_sym(sym_to_vec(r)) == r);

  SymmetrySpecd rot{SymmetryKind::rotational, 6, Vec3d(0, 0.2, 0), Vec3d::UnitY()};
  const SymmetryVector v = sym_to_vec(rot);
  CHECK(v[0] == 0.0);
  CHECK(v[1] == doctest::Approx((6.0 - 2.0) / 14.0));
  CHECK(vec_to_sym(v).fold == 6);

  SymmetryVector p = v;
  p[0] = 0.1;
  CHECK(vec_to_sym(p).kind == SymmetryKind::rotational);
  p[0] = -0.9;
  CHECK(vec_to_sym(p).kind == SymmetryKind::reflective);
  CHECK(vec_to_sym(p).fold == 2);
  p[0] = 0.9;
  p[1] = 3.0;
  CHECK(vec_to_sym(p).kind == SymmetryKind::translational);
  CHECK(vec_to_sym(p).fold == kMaxFold);
  p[0] = 0.0;
  p.segment<3>(5) = Vec3d(0, 0, 2);
  CHECK(vec_to_sym(p).direction.isApprox(Vec3d::UnitZ()));
}

TEST_CASE("relation detection on a four-legged table") {
  std::vector<Obbd> boxes{box({0, 0.05, 0}, {1.0, 0.1, 0.6})};
  for (double x : {-0.45, 0.45}) {
    for (double z : {-0.25, 0.25}) boxes.push_back(box({x, -0.4, z}, {0.08, 0.8, 0.08}));
  }
  const PartGraph g = detect_relations(boxes);
  CHECK(g.adjacency.size() == 4);
  int members = 0;
  for (const auto& s : g.symmetries) {
    CHECK(s.spec.kind == SymmetryKind::reflective);
    members += static_cast<int>(s.members.size());
  }
  CHECK(members == 4);
  // Both pairs share one mirror plane.
  REQUIRE(g.symmetries.size() == 2);
  CHECK(equivalent(g.symmetries[0].spec, g.symmetries[1].spec, 1e-9));

  // Square footprint: one rotational relation of fold 4.
  std::vector<Obbd> square{box({0, 0.05, 0}, {0.8, 0.1, 0.8})};
  for (double x : {-0.35, 0.35}) {
    for (double z : {-0.35, 0.35}) square.push_back(box({x, -0.4, z}, {0.08, 0.8, 0.08}));
  }
  const PartGraph sq = detect_relations(square);
  REQUIRE(sq.symmetries.size() == 1);
  CHECK(sq.symmetries[0].spec.kind == SymmetryKind::rotational);
  CHECK(sq.symmetries[0].spec.fold == 4);
}

TEST_CASE("relation detection negatives and rotational arms") {
  const PartGraph two = detect_relations(std::vector<Obbd>{box({0, 0, 0}, {1, 1, 1}), box({1, 0, 0}, {1, 0.5, 1})});
  CHECK(two.symmetries.empty());
  CHECK(two.adjacency.size() == 1);

  const Obbd stem = box({0, 0, 0}, {0.1, 1.0, 0.1});
  const Obbd arm = box({0.3, 0.3, 0}, {0.5, 0.05, 0.05});
  SymmetrySpecd rot{SymmetryKind::rotational, 5, Vec3d::Zero(), Vec3d::UnitY()};
  std::vector<Obbd> boxes{stem};
  for (const auto& m : apply_symmetry(arm, rot)) boxes.push_back(m);
  const PartGraph g = detect_relations(boxes);
  REQUIRE(g.symmetries.size() == 1);
  CHECK(g.symmetries[0].spec.kind == SymmetryKind::rotational);
  CHECK(g.symmetries[0].spec.fold == 5);
  CHECK(g.symmetries[0].members.size() == 5);

  CHECK_THROWS_AS(detect_relations(std::vector<Obbd>{box({0, 0, 0}, {1, 1, 1}), box({5, 0, 0}, {1, 2, 1})}),
                  GraphInvariantError);
}

TEST_CASE("hierarchy expansion and invariants") {
  const Obbd seat = box({0, 0, 0}, {1, 0.1, 1});
  const Obbd leg = box({-0.45, -0.4, 0}, {0.1, 0.7, 0.1});
  SymmetrySpecd refl{SymmetryKind::reflective, 2, Vec3d::Zero(), Vec3d::UnitX()};
  Hierarchy h;
  const int l = h.add_leaf(1, leg);
  const int s = h.add_symmetry(l, refl);
  h[s].parts = {1, 2};
  const int t = h.add_leaf(0, seat);
  h.add_adjacency(s, t);

  PartGraph g;
  g.parts = {{0, "seat", seat}, {1, "leg", leg}, {2, "leg", apply_symmetry(leg, refl)[1]}};
  CHECK_NOTHROW(check_hierarchy(h, g));
  CHECK(h.leaf_count() == 2);
  CHECK(expand_boxes(h).size() == 3);
  CHECK(h.depth() == 2);
  CHECK(topology_key(h) == "A(S(L),L)");
  CHECK(h.heights().back() == 2);
  const auto leaves = expand_leaves(h);
  CHECK_FALSE(leaves[0].image);
  CHECK(leaves[1].image);

  const Hierarchy sub = extract_subtree(h, s);
  CHECK(topology_key(sub) == "S(L)");

  g.parts.pop_back();
  CHECK_THROWS_AS(check_hierarchy(h, g), GraphInvariantError);
}
