#include "grass/data/fixtures.hpp"
#include "grass/data/generator.hpp"
#include "grass/data/io.hpp"
#include "grass/shape/relations.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>

using namespace grass;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("grass_test_data_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::set<int> member_set(const SymmetryRelation& r) { return {r.members.begin(), r.members.end()}; }

bool has_edge(const PartGraph& g, int a, int b) {
  return std::find(g.adjacency.begin(), g.adjacency.end(), std::pair{std::min(a, b), std::max(a, b)}) !=
         g.adjacency.end();
}

std::vector<ShapeRecord> sample_all(int per_category, std::uint64_t seed) {
  std::vector<ShapeRecord> out;
  for (const auto& c : kCategories) {
    auto s = generate_shapes(c, per_category, seed);
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

}  // namespace

TEST_CASE("generation is deterministic and prefix stable") {
  const auto a = generate_shapes("chair", 1, 7);
  const auto b = generate_shapes("chair", 1, 7);
  CHECK(shape_to_json(a[0]).dump() == shape_to_json(b[0]).dump());
  const auto longer = generate_shapes("chair", 5, 7);
  CHECK(longer[0] == a[0]);
  CHECK_FALSE(generate_shapes("chair", 1, 8)[0] == a[0]);
  CHECK_THROWS_AS(generate_shapes("chair", 0, 7), std::invalid_argument);
  CHECK_THROWS_AS(generate_shapes("lamp", 1, 7), std::invalid_argument);
}

TEST_CASE("candelabra carry exactly one rotational group of 3 to 7 arms") {
  for (const auto& s : generate_shapes("candelabrum", 50, 3)) {
    int rotational = 0;
    for (const auto& r : s.graph.symmetries) {
      if (r.spec.kind != SymmetryKind::rotational) continue;
      ++rotational;
      CHECK(r.spec.fold >= 3);
      CHECK(r.spec.fold <= 7);
      CHECK(static_cast<int>(r.members.size()) == r.spec.fold);
      CHECK(s.subclass == "arms-" + std::to_string(r.spec.fold));
    }
    CHECK(rotational == 1);
  }
}

TEST_CASE("chair subclasses each cover at least a fifth") {
  const auto shapes = generate_shapes("chair", 200, 11);
  std::map<std::string, int> counts;
  for (const auto& s : shapes) ++counts[s.subclass];
  REQUIRE(counts.size() == 3);
  for (const auto& [sub, n] : counts) {
    INFO(sub);
    CHECK(n >= 40);
  }
}

TEST_CASE("generated shapes satisfy invariants and relations are recoverable") {
  for (const auto& s : sample_all(60, 5)) {
    INFO(s.id << " " << s.subclass);
    CHECK_NOTHROW(validate(s.graph));
    REQUIRE(s.styles.size() == s.graph.parts.size());
    const auto& labels = category_labels(s.category);
    double max_r = 0.0;
    for (const auto& p : s.graph.parts) {
      CHECK(is_valid(p.box));
      CHECK(std::find(labels.begin(), labels.end(), p.label) != labels.end());
      for (const auto& c : obb_corners(p.box)) max_r = std::max(max_r, c.norm());
    }
    CHECK(max_r <= 1.0 + 1e-9);
    CHECK(max_r >= 1.0 - 1e-9);

    const PartGraph d = detect_relations(s.graph.parts);
    CHECK(d.adjacency == s.graph.adjacency);
    REQUIRE(d.symmetries.size() == s.graph.symmetries.size());
    for (const auto& gt : s.graph.symmetries) {
      const auto it = std::find_if(d.symmetries.begin(), d.symmetries.end(),
                                   [&](const SymmetryRelation& r) { return member_set(r) == member_set(gt); });
      REQUIRE(it != d.symmetries.end());
      CHECK(it->generator == gt.generator);
      CHECK(it->members == gt.members);
      CHECK(equivalent(it->spec, gt.spec, 1e-6));
    }
  }
}

TEST_CASE("members of one rotational or translational group never touch each other") {
  for (const auto& s : sample_all(60, 9)) {
    INFO(s.id << " " << s.subclass);
    for (const auto& r : s.graph.symmetries) {
      if (r.spec.kind == SymmetryKind::reflective) continue;
      for (std::size_t a = 0; a < r.members.size(); ++a) {
        for (std::size_t b = a + 1; b < r.members.size(); ++b) CHECK_FALSE(has_edge(s.graph, r.members[a], r.members[b]));
      }
    }
    // Every group member touches something outside its group.
    for (const auto& r : s.graph.symmetries) {
      const auto m = member_set(r);
      for (int id : r.members) {
        bool outside = false;
        for (const auto& [a, b] : s.graph.adjacency) {
          if ((a == id && !m.count(b)) || (b == id && !m.count(a))) outside = true;
        }
        CHECK(outside);
      }
    }
  }
}

TEST_CASE("rule fixtures") {
  const auto fx = fixture_arrangements();
  REQUIRE(fx.size() == 7);
  const std::vector<std::string> rules{"M1", "M2", "G1", "G2", "G3", "A1", "A2"};
  for (std::size_t i = 0; i < fx.size(); ++i) {
    const auto& f = fx[i];
    INFO(f.rule);
    CHECK(f.rule == rules[i]);
    CHECK(is_connected(f.graph));
    double max_r = 0.0;
    for (const auto& p : f.graph.parts) {
      CHECK(p.box.dims.z() == doctest::Approx(f.graph.parts[0].box.dims.z()));
      for (const auto& c : obb_corners(p.box)) max_r = std::max(max_r, c.norm());
    }
    CHECK(max_r == doctest::Approx(1.0));
    // Each expected first merge is available as a relation.
    for (const auto& e : f.expected_first) {
      bool legal = e.size() == 2 && has_edge(f.graph, *e.begin(), *e.rbegin());
      for (const auto& r : f.graph.symmetries) legal = legal || member_set(r) == e;
      CHECK(legal);
    }
  }
  auto folds = [](const RuleFixture& f) {
    std::multiset<int> out;
    for (const auto& r : f.graph.symmetries) out.insert(r.spec.fold);
    return out;
  };
  CHECK(folds(fx[0]) == std::multiset<int>{2});
  CHECK(folds(fx[1]) == std::multiset<int>{2, 2});
  CHECK(folds(fx[2]) == std::multiset<int>{2, 4});
  CHECK(folds(fx[3]) == std::multiset<int>{2, 2});
  CHECK(folds(fx[4]) == std::multiset<int>{3, 3});
  // G2: one reflective and one translational pair.
  std::set<SymmetryKind> g2;
  for (const auto& r : fx[3].graph.symmetries) g2.insert(r.spec.kind);
  CHECK(g2 == std::set<SymmetryKind>{SymmetryKind::reflective, SymmetryKind::translational});
  // A1: block 1 sits on the bar's mirror plane and block 2 does not.
  const auto& a1 = fx[5].graph;
  CHECK(has_edge(a1, 0, 1));
  CHECK(has_edge(a1, 0, 2));
  const Vec3d c0 = a1.parts[0].box.center;
  CHECK(std::abs(a1.parts[1].box.center.x() - c0.x()) < 1e-9);
  CHECK(std::abs(a1.parts[2].box.center.x() - c0.x()) > 0.1);
  // A2: both contacts are adjacencies, one flush and one with a gap.
  const auto& a2 = fx[6].graph;
  CHECK(has_edge(a2, 0, 1));
  CHECK(has_edge(a2, 0, 2));
  CHECK(obb_separation(a2.parts[0].box, a2.parts[1].box) < 1e-9);
  CHECK(obb_separation(a2.parts[0].box, a2.parts[2].box) > 0.01);
}

TEST_CASE("solid voxelization matches a world-space point-in-box count") {
  Obbd b;
  b.center = Vec3d(0.3, -0.2, 0.1);
  b.dims = Vec3d(0.5, 0.2, 0.3);
  b.axis1 = Vec3d(1, 1, 0).normalized();
  b.axis2 = Vec3d(-1, 1, 1).normalized();
  const int r = 8;
  const VoxelGrid v = voxelize_part(b, r, PartStyle::solid);
  // Cell centers placed in world space, then tested by projection.
  std::size_t inside = 0;
  for (int z = 0; z < r; ++z) {
    for (int y = 0; y < r; ++y) {
      for (int x = 0; x < r; ++x) {
        const double step = 1.0 / (r - 2);
        const Vec3d s((x - 0.5) * step - 0.5, (y - 0.5) * step - 0.5, (z - 0.5) * step - 0.5);
        const Vec3d p = b.center + s.x() * b.dims.x() * b.axis1 + s.y() * b.dims.y() * b.axis2 +
                        s.z() * b.dims.z() * b.axis3();
        bool in = true;
        for (int a = 0; a < 3; ++a) in = in && std::abs((p - b.center).dot(b.axis(a))) <= b.dims[a] / 2 + 1e-12;
        inside += in;
        CHECK((v.at(x, y, z) >= 0.5f) == in);
      }
    }
  }
  CHECK(v.occupied() == inside);
  CHECK(inside == 216u);
}

TEST_CASE("shell is solid minus its erosion") {
  Obbd b;
  b.dims = Vec3d(1, 0.5, 0.25);
  for (int r : {8, 16, 32}) {
    const auto solid = voxelize_part(b, r, PartStyle::solid);
    const auto shell = voxelize_part(b, r, PartStyle::shell);
    auto on = [&](int x, int y, int z) {
      return x >= 0 && y >= 0 && z >= 0 && x < r && y < r && z < r && solid.at(x, y, z) >= 0.5f;
    };
    for (int z = 0; z < r; ++z) {
      for (int y = 0; y < r; ++y) {
        for (int x = 0; x < r; ++x) {
          const bool interior = on(x, y, z) && on(x - 1, y, z) && on(x + 1, y, z) && on(x, y - 1, z) &&
                                on(x, y + 1, z) && on(x, y, z - 1) && on(x, y, z + 1);
          CHECK((shell.at(x, y, z) >= 0.5f) == (on(x, y, z) && !interior));
        }
      }
    }
    const std::size_t n = static_cast<std::size_t>(r - 2);
    CHECK(shell.occupied() == n * n * n - (n - 2) * (n - 2) * (n - 2));
  }
}

TEST_CASE("round styles and degenerate boxes") {
  Obbd b;
  b.dims = Vec3d(2, 1, 1);
  const auto solid = voxelize_part(b, 32, PartStyle::solid);
  const auto ell = voxelize_part(b, 32, PartStyle::ellipsoid);
  const auto cyl = voxelize_part(b, 32, PartStyle::cylinder);
  const double fs = static_cast<double>(solid.occupied());
  CHECK(ell.occupied() / fs == doctest::Approx(std::numbers::pi / 6).epsilon(0.03));
  CHECK(cyl.occupied() / fs == doctest::Approx(std::numbers::pi / 4).epsilon(0.03));
  // Cylinder runs along the longest axis: every x slice has the same disc.
  for (int x = 2; x < 30; ++x) CHECK(cyl.at(x, 16, 16) == 1.0f);
  CHECK(cyl.at(16, 1, 1) == 0.0f);

  b.dims = Vec3d(1e-5, 1, 1);
  for (auto style : {PartStyle::solid, PartStyle::shell, PartStyle::cylinder, PartStyle::ellipsoid}) {
    CHECK(voxelize_part(b, 8, style).occupied() == 0u);
  }
  CHECK(iou(solid, solid) == 1.0);
  CHECK(iou(solid, ell) == doctest::Approx(ell.occupied() / fs));
}

TEST_CASE("shape files round trip") {
  const auto dir = temp_dir("shapes");
  for (const auto& s : sample_all(4, 21)) {
    CHECK(shape_from_json(shape_to_json(s)) == s);
    const auto path = dir / (s.id + ".json");
    save_shape(path, s);
    CHECK(load_shape(path) == s);
    CHECK(read_json_file(path).at("schema_version") == kShapeSchemaVersion);
  }

  // Relations are recomputed when absent.
  const auto s = generate_shapes("table", 1, 2)[0];
  Json j = shape_to_json(s);
  j.erase("adjacency");
  j.erase("symmetries");
  CHECK(shape_from_json(j) == s);

  Json bad = shape_to_json(s);
  bad["parts"][0]["obb"].erase("axis1");
  save_shape(dir / "ok.json", s);
  write_json_file(dir / "bad.json", bad);
  try {
    load_shape(dir / "bad.json");
    FAIL("expected a FormatError");
  } catch (const FormatError& e) {
    CHECK(e.field() == "obb.axis1");
    CHECK(e.path() == (dir / "bad.json").string());
  }
  Json ver = shape_to_json(s);
  ver["schema_version"] = 99;
  CHECK_THROWS_AS(shape_from_json(ver), FormatError);
}

TEST_CASE("dataset manifest splits and round trip") {
  const auto dir = temp_dir("dataset");
  std::vector<ShapeRecord> shapes;
  for (const auto& c : kCategories) {
    auto s = generate_shapes(c, c == "candelabrum" ? 34 : 33, 4);
    shapes.insert(shapes.end(), s.begin(), s.end());
  }
  REQUIRE(shapes.size() == 100);
  const Dataset d = write_dataset(dir, shapes, 0.8, 17);
  const auto train = d.manifest.indices(Split::train);
  const auto test = d.manifest.indices(Split::test);
  CHECK(train.size() == 80);
  CHECK(test.size() == 20);
  std::set<std::size_t> all(train.begin(), train.end());
  for (std::size_t i : test) CHECK(all.insert(i).second);
  CHECK(all.size() == 100);
  CHECK(d.manifest.category_counts() == std::map<std::string, int>{{"candelabrum", 34}, {"chair", 33}, {"table", 33}});

  const Dataset back = load_dataset(dir / "manifest.json");
  CHECK(back.manifest == d.manifest);
  CHECK(back.shapes == d.shapes);
  CHECK(back.split(Split::test).size() == 20);

  Json m = read_json_file(dir / "manifest.json");
  m["counts"]["chair"] = 5;
  write_json_file(dir / "tampered.json", m);
  CHECK_THROWS_AS(load_manifest(dir / "tampered.json"), FormatError);
}

TEST_CASE("voxel files and meshes") {
  Obbd b;
  b.dims = Vec3d(1, 0.6, 0.3);
  VoxelGrid v = voxelize_part(b, 16, PartStyle::ellipsoid);
  CHECK(voxel_from_json(voxel_to_json(v, true)) == v);
  v.values[5] = 0.3125f;
  v.values[7] = 1e-7f;
  CHECK(voxel_from_json(voxel_to_json(v, false)) == v);
  Json bad = voxel_to_json(v, true);
  bad["R"] = 8;
  CHECK_THROWS_AS(voxel_from_json(bad), FormatError);

  b.center = Vec3d(1, 2, 3);
  b.axis1 = Vec3d(0, 1, 0);
  b.axis2 = Vec3d(0, 0, 1);
  const auto mesh = boxes_to_mesh({b, b});
  CHECK(mesh.vertices.size() == 16);
  CHECK(mesh.triangles.size() == 24);
  for (const auto& t : mesh.triangles) {
    const Vec3d& p0 = mesh.vertices[t[0]];
    const Vec3d n = (mesh.vertices[t[1]] - p0).cross(mesh.vertices[t[2]] - p0);
    const Vec3d c = (p0 + mesh.vertices[t[1]] + mesh.vertices[t[2]]) / 3;
    CHECK(n.dot(c - b.center) > 0);
  }
  const auto dir = temp_dir("mesh");
  write_obj(dir / "m.obj", mesh);
  CHECK(std::filesystem::file_size(dir / "m.obj") > 0);
}
