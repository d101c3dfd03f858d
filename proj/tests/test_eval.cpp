#include "grass/data/generator.hpp"
#include "grass/eval/eval.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

using namespace grass;

namespace {

Obbd unit_box(double x) {
  Obbd b;
  b.center = Vec3d(x, 0, 0);
  b.dims = Vec3d(0.1, 0.1, 0.1);
  b.axis1 = Vec3d::UnitX();
  b.axis2 = Vec3d::UnitY();
  return b;
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

// ((a,b),c) when `ab_first`, else ((a,c),b); parts 0, 1, 2 are a, b, c.
LabeledHierarchy three(bool ab_first) {
  LabeledHierarchy lh;
  auto& h = lh.hierarchy;
  const int a = h.add_leaf(0, unit_box(0));
  const int b = h.add_leaf(1, unit_box(1));
  const int c = h.add_leaf(2, unit_box(2));
  if (ab_first)
    h.add_adjacency(h.add_adjacency(a, b), c);
  else
    h.add_adjacency(h.add_adjacency(a, c), b);
  lh.labels = {{0, "a"}, {1, "b"}, {2, "c"}};
  return lh;
}

}  // namespace

TEST_CASE("average code feature") {
  Hierarchy h;
  const int l0 = h.add_leaf(0, unit_box(0));
  const int l1 = h.add_leaf(1, unit_box(1));
  h.add_adjacency(l0, l1);
  h[0].code = vec({1, 2});
  h[1].code = vec({3, -4});
  h[2].code = vec({5, 8});
  const Vector mean = avg_code_feature(h);
  CHECK(mean(0) == 3.0);
  CHECK(mean(1) == 2.0);
  CHECK(avg_code_feature(h, 1) == vec({3, -4}));

  Hierarchy single;
  single.add_leaf(0, unit_box(0));
  single[0].code = vec({0.25, -1.5, 7});
  CHECK(avg_code_feature(single) == *single[0].code);

  for (auto& n : h.nodes) n.code = vec({0.1, 0.7});
  CHECK(avg_code_feature(h).isApprox(vec({0.1, 0.7}), 1e-15));

  h[1].code.reset();
  CHECK_THROWS_AS(avg_code_feature(h), std::invalid_argument);
  CHECK_NOTHROW(avg_code_feature(h, 0));
}

TEST_CASE("classification on separable and random features") {
  std::vector<Vector> f;
  std::vector<std::string> labels;
  const std::vector<std::string> classes{"x", "y", "z"};
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < 6; ++i) {
      f.push_back(vec({10.0 * c + 0.01 * i, -3.0 * c}));
      labels.push_back(classes[static_cast<std::size_t>(c)]);
    }
  }
  const auto r = classify_and_pr(f, labels);
  CHECK(r.accuracy == 1.0);
  CHECK(r.classes == classes);
  for (const auto& [c, curve] : r.curves) {
    REQUIRE_FALSE(curve.empty());
    // Precision stays 1 until recall reaches 1.
    for (const auto& p : curve) {
      if (p.recall < 1.0) CHECK(p.precision == 1.0);
    }
    const auto full = std::find_if(curve.begin(), curve.end(), [](const PrPoint& p) { return p.recall == 1.0; });
    REQUIRE(full != curve.end());
    CHECK(full->precision == 1.0);
    CHECK(curve.back().recall == 1.0);
    // Everything retrieved at the last threshold: 5 relevant of 17 per query.
    CHECK(curve.back().precision == doctest::Approx(5.0 / 17.0));
  }

  Rng rng(11);
  std::normal_distribution<double> normal;
  std::vector<Vector> rf;
  std::vector<std::string> rl;
  for (int i = 0; i < 300; ++i) {
    Vector v(8);
    for (int k = 0; k < 8; ++k) v(k) = normal(rng);
    rf.push_back(v);
    rl.push_back(classes[static_cast<std::size_t>(i % 3)]);
  }
  const auto rr = classify_and_pr(rf, rl);
  CHECK(std::abs(rr.accuracy - 1.0 / 3.0) <= 0.1);
  for (const auto& [c, curve] : rr.curves) {
    double last = 0.0;
    for (const auto& p : curve) {
      CHECK(p.precision >= 0.0);
      CHECK(p.precision <= 1.0);
      CHECK(p.recall >= last);
      CHECK(p.recall <= 1.0);
      last = p.recall;
    }
  }

  const auto dir = std::filesystem::temp_directory_path() / "grass_test_eval";
  std::filesystem::create_directories(dir);
  write_pr_csv(dir / "pr.csv", r);
  write_pr_svg(dir / "pr.svg", r);
  std::ifstream in(dir / "pr.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "class,threshold,precision,recall");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  std::size_t points = 0;
  for (const auto& [c, curve] : r.curves) points += curve.size();
  CHECK(rows == points);
  CHECK(std::filesystem::file_size(dir / "pr.svg") > 0);

  const std::vector<std::string> one(f.size(), "x");
  CHECK_THROWS_AS(classify_and_pr(f, one), std::invalid_argument);
}

TEST_CASE("merge distances") {
  // Leaf 0 (seat) with a reflective pair of legs 1 and 2, the pair being
  // one leaf and its symmetry image.
  LabeledHierarchy lh;
  auto& h = lh.hierarchy;
  const int seat = h.add_leaf(0, unit_box(0));
  const int leg = h.add_leaf(1, unit_box(1));
  SymmetrySpecd spec;
  spec.kind = SymmetryKind::reflective;
  spec.fold = 2;
  spec.point = Vec3d::Zero();
  spec.direction = Vec3d::UnitX();
  const int pair = h.add_symmetry(leg, spec);
  h[pair].parts = {1, 2};
  const int back = h.add_leaf(3, unit_box(3));
  h.add_adjacency(h.add_adjacency(seat, pair), back);
  lh.labels = {{0, "seat"}, {1, "leg"}, {2, "leg"}, {3, "back"}};

  const auto d = merge_distances(lh);
  REQUIRE(d.size() == 4);
  CHECK(d.at(0).at("seat") == 0);
  CHECK(d.at(0).at("leg") == 1);
  CHECK(d.at(0).at("back") == 2);
  CHECK(d.at(1).at("leg") == 0);
  CHECK(d.at(1).at("seat") == 2);
  CHECK(d.at(1).at("back") == 3);
  // The image sits one edge below the symmetry node, like its generator.
  CHECK(d.at(2) == d.at(1));
  CHECK(d.at(3).at("seat") == 1);
  CHECK(d.at(3).at("leg") == 1);

  lh.labels.erase(3);
  CHECK_THROWS_AS(merge_distances(lh), std::invalid_argument);
}

TEST_CASE("consistency metric") {
  const auto consistent = consistency_fixture(false);
  const auto c1 = consistency_metric(consistent);
  CHECK(c1.value == 1.0);
  CHECK(c1.triples.size() == 3);

  const auto coin = consistency_fixture(true);
  const auto c0 = consistency_metric(coin);
  CHECK(c0.value == 0.0);
  for (const auto& t : c0.triples) {
    CHECK(t.p_forward == 0.5);
    CHECK(t.p_backward == 0.5);
  }

  // Hand computation: a sees b first in one shape and c first in the other
  // (entropy 1); b and c each see one strict order and one tie (0.5 each).
  std::vector<LabeledHierarchy> mixed{three(true), three(false)};
  const auto cm = consistency_metric(mixed);
  CHECK(cm.value == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  // Relabeling and reordering.
  std::vector<LabeledHierarchy> relabeled = mixed;
  for (auto& s : relabeled) s.labels = {{0, "q"}, {1, "p"}, {2, "r"}};
  CHECK(consistency_metric(relabeled).value == doctest::Approx(cm.value).epsilon(1e-15));
  std::vector<LabeledHierarchy> swapped{mixed[1], mixed[0]};
  CHECK(consistency_metric(swapped).value == cm.value);
  auto coin_shuffled = coin;
  std::rotate(coin_shuffled.begin(), coin_shuffled.begin() + 1, coin_shuffled.end());
  for (auto& s : coin_shuffled)
    for (auto& [p, l] : s.labels) l = l == "a" ? "c" : l == "c" ? "a" : l;
  CHECK(consistency_metric(coin_shuffled).value == 0.0);

  // Two labels only: no triple.
  LabeledHierarchy two = three(true);
  two.labels = {{0, "a"}, {1, "b"}, {2, "b"}};
  std::vector<LabeledHierarchy> pairs{two};
  CHECK_THROWS_AS(consistency_metric(pairs), std::invalid_argument);
}

TEST_CASE("partial matching") {
  Rng rng(3);
  std::normal_distribution<double> normal;
  std::vector<Hierarchy> corpus;
  for (int s = 0; s < 3; ++s) {
    Hierarchy h;
    const int a = h.add_leaf(0, unit_box(0));
    const int b = h.add_leaf(1, unit_box(1));
    const int c = h.add_leaf(2, unit_box(2));
    h.add_adjacency(h.add_adjacency(a, b), c);
    for (auto& n : h.nodes) {
      Vector v(4);
      for (int k = 0; k < 4; ++k) v(k) = normal(rng);
      n.code = v;
    }
    corpus.push_back(h);
  }
  const Vector query = avg_code_feature(corpus[1], 3);
  const auto m = partial_match(query, corpus, 5);
  REQUIRE(m.size() == 5);
  CHECK(m[0].shape == 1);
  CHECK(m[0].node == 3);
  CHECK(m[0].distance == 0.0);
  for (std::size_t i = 1; i < m.size(); ++i) CHECK(m[i - 1].distance <= m[i].distance);
  CHECK(partial_match(query, corpus, -1).size() == 15);
  CHECK(partial_match(query, std::span<const Hierarchy>{}, 5).empty());
}

TEST_CASE("rule report and merge trail") {
  const auto model = RvnnModel::create({}, 7);
  const auto fixtures = fixture_arrangements();
  const auto report = rule_fixture_report(fixtures, model);
  REQUIRE(report.rows.size() == 7);
  const std::vector<std::string> rules{"M1", "M2", "G1", "G2", "G3", "A1", "A2"};
  for (std::size_t i = 0; i < 7; ++i) {
    CHECK(report.rows[i].rule == rules[i]);
    CHECK(report.rows[i].first_merge.size() >= 2);
  }
  CHECK(report.agreement() >= 0);
  CHECK(report.agreement() <= 7);
  const std::string text = report.to_text();
  CHECK(std::count(text.begin(), text.end(), '\n') == 8);
  CHECK(report.to_json()["rules"].size() == 7);

  const auto shape = generate_shape("chair", "four-leg", 5);
  std::vector<std::vector<int>> merges;
  const Hierarchy h = infer_hierarchy(shape.graph, model, {}, &merges);
  int internal = 0;
  for (const auto& n : h.nodes) internal += n.type != NodeType::leaf;
  CHECK(static_cast<int>(merges.size()) == internal);
  std::vector<int> all;
  for (const auto& p : shape.graph.parts) all.push_back(p.id);
  std::sort(all.begin(), all.end());
  auto last = merges.back();
  std::sort(last.begin(), last.end());
  CHECK(last == all);
  CHECK(infer_hierarchy(shape.graph, model) == h);
}

TEST_CASE("corpus encoding is thread independent") {
  const auto model = RvnnModel::create({}, 2);
  std::vector<PartGraph> graphs;
  for (const auto& s : generate_shapes("chair", 5, 4)) graphs.push_back(s.graph);
  const auto serial = encode_corpus(model, graphs, 1);
  const auto threaded = encode_corpus(model, graphs, 3);
  REQUIRE(serial.size() == 5);
  CHECK(serial == threaded);
  for (const auto& h : serial) CHECK_NOTHROW(avg_code_feature(h));
}

TEST_CASE("labeled subtrees") {
  LabeledHierarchy lh = three(true);
  lh.labels = {{0, "leg"}, {1, "leg"}, {2, "seat"}};
  CHECK(subtree_label(lh, 3) == "leg");
  CHECK(subtree_label(lh, 4) == "");
  CHECK(subtree_label(lh, 2) == "seat");
  CHECK(largest_labeled_subtree(lh, "leg") == 3);
  CHECK(largest_labeled_subtree(lh, "seat") == 2);
  CHECK(largest_labeled_subtree(lh, "arm") == -1);
}
