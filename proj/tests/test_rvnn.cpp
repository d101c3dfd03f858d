#include "grass/core/gradient_check.hpp"
#include "grass/data/generator.hpp"
#include "grass/rvnn/infer.hpp"
#include "grass/rvnn/train.hpp"
#include "grass/shape/relations.hpp"

#include <doctest.h>

#include <filesystem>
#include <limits>

using namespace grass;

namespace {

RvnnConfig tiny() { return {6, 5, 4}; }

Obbd box(double x, double y, double z, double w, double h, double d) {
  Obbd b;
  b.center = Vec3d(x, y, z);
  b.dims = Vec3d(w, h, d);
  return b;
}

Hierarchy sampled(const std::string& category, int index, std::uint64_t seed) {
  const auto s = generate_shapes(category, index + 1, seed)[index];
  Rng rng(seed);
  return sample_hierarchy(s.graph, rng);
}

// Hand-built three-level tree with one symmetry node.
Hierarchy three_level() {
  Hierarchy h;
  const int a = h.add_leaf(0, box(0, 0, 0, 0.6, 0.1, 0.6));
  const int l = h.add_leaf(1, box(-0.25, -0.3, 0, 0.05, 0.5, 0.05));
  SymmetrySpecd s;
  s.kind = SymmetryKind::reflective;
  s.direction = Vec3d::UnitX();
  s.point = Vec3d::Zero();
  const int sy = h.add_symmetry(l, s);
  h[sy].parts = {1, 2};
  h.add_adjacency(a, sy);
  return h;
}

void zero_all(RvnnModel& m) {
  for (auto& e : m.store().entries()) e.value.matrix().setZero();
}

}  // namespace

TEST_CASE("unit shapes follow the configuration") {
  const auto m = RvnnModel::create({}, 1);
  CHECK(m.n() == 80);
  CHECK(m.store().value("sym_enc.1.w").cols() == 88);
  CHECK(m.store().value("adj_enc.1.w").cols() == 160);
  CHECK(m.store().value("adj_enc.1.w").rows() == 100);
  CHECK(m.store().value("box_enc.w").rows() == 80);
  CHECK(m.store().value("box_enc.w").cols() == 12);
  const Obbd b = box(0.1, 0.2, 0.3, 0.4, 0.5, 0.6);
  const Vector x = m.encode_leaf(b);
  CHECK(x.size() == 80);
  const auto [l, r] = m.decode_adj(m.encode_adj(x, x));
  CHECK(l.size() == 80);
  CHECK(r.size() == 80);
  const auto [c, p] = m.decode_sym(m.encode_sym(x, SymmetryVector::Zero()));
  CHECK(c.size() == 80);
  CHECK(p.size() == 8);
  const auto probs = m.classify_node(x);
  CHECK(probs.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((probs.array() > 0).all());
}

TEST_CASE("zero parameters give zero codes") {
  auto m = RvnnModel::create({}, 1);
  zero_all(m);
  const Vector x = m.encode_leaf(box(0.3, -0.2, 0.1, 0.5, 0.4, 0.2));
  CHECK(x.isZero(0));
  CHECK(m.encode_adj(Vector::Ones(80), -Vector::Ones(80)).isZero(0));
  CHECK(m.encode_sym(Vector::Ones(80), SymmetryVector::Ones()).isZero(0));
  CHECK(m.decode_adj(Vector::Ones(80)).first.isZero(0));
  CHECK(m.decode_sym(Vector::Ones(80)).first.isZero(0));
  CHECK(m.decode_sym(Vector::Ones(80)).second.isZero(0));
  CHECK(m.classify_node(Vector::Ones(80)).isApproxToConstant(1.0 / 3.0, 1e-15));
}

TEST_CASE("network space maps invert") {
  const Obbd b = box(0.1, -0.9, 0.3, 1.4, 0.05, 0.6);
  CHECK(corner_set_distance(net_to_box(box_to_net(b)), b) < 1e-12);
  CHECK((box_to_net(b).array().abs() < 1.0).all());
  SymmetrySpecd s;
  s.kind = SymmetryKind::rotational;
  s.fold = 6;
  s.direction = Vec3d::UnitY();
  s.point = Vec3d::Zero();
  CHECK(net_to_sym(sym_to_net(s)) == s);
  CHECK(sym_to_net(s)[1] == doctest::Approx(4.0 / 14.0));
}

TEST_CASE("shape encoding is bottom-up, deterministic and matches the batched graph") {
  const auto m = RvnnModel::create(tiny(), 4);
  Hierarchy single;
  single.add_leaf(0, box(0, 0, 0, 1, 1, 1));
  CHECK(encode_root(m, single) == m.encode_leaf(single[0].box));

  std::vector<Hierarchy> trees{three_level(), sampled("chair", 1, 3), sampled("candelabrum", 0, 3)};
  for (const auto& h : trees) {
    const auto e = encode_shape(m, h);
    for (const auto& n : e.nodes) CHECK(n.code->size() == 6);
    CHECK(encode_root(m, h) == encode_root(m, h));
  }
  Graph g(&m.store());
  std::vector<const Hierarchy*> ptrs;
  for (const auto& h : trees) ptrs.push_back(&h);
  const auto enc = encode_batch(g, m, ptrs);
  for (std::size_t t = 0; t < trees.size(); ++t) {
    const auto plain = encode_shape(m, trees[t]);
    for (int i = 0; i <= trees[t].root(); ++i) {
      const auto& ref = enc.codes[t][i];
      const Vector v = g.forward(ref.var).row(ref.row).transpose();
      CHECK((v - *plain[i].code).norm() < 1e-12);
    }
  }
}

TEST_CASE("known-topology decoding preserves topology and matches the batched graph") {
  const auto m = RvnnModel::create(tiny(), 9);
  for (int k = 0; k < 6; ++k) {
    const Hierarchy h = sampled(k % 2 ? "chair" : "table", k, 21);
    const Vector root = encode_root(m, h);
    const Hierarchy d = decode_known(m, root, h);
    CHECK(topology_key(d) == topology_key(h));
    for (int i = 0; i <= h.root(); ++i) {
      CHECK(d[i].type == h[i].type);
      CHECK(d[i].parts == h[i].parts);
      CHECK(is_valid(d[i].box));
    }
    Graph g(&m.store());
    const Hierarchy* trees[] = {&h};
    const Var r = g.constant(Matrix(root.transpose()));
    const auto dec = decode_batch(g, m, trees, {{0, h.root(), {r, 0}}});
    for (const auto& b : dec.boxes) {
      const Vector v = g.forward(b.value.var).row(b.value.row).transpose();
      CHECK((net_to_box(v).center - d[b.node].box.center).norm() < 1e-12);
    }
    CHECK(dec.codes.size() == h.nodes.size());
  }
}

TEST_CASE("free decoding respects its caps") {
  auto m = RvnnModel::create(tiny(), 2);
  // Untrained model on the zero code terminates one way or the other.
  const auto r = try_decode_free(m, Vector::Zero(6));
  if (r.ok()) {
    CHECK(r.hierarchy->depth() <= 16);
    CHECK(r.hierarchy->leaf_count() <= 64);
  } else {
    CHECK_FALSE(r.error.empty());
  }
  // A classifier that always answers "adjacency" hits the depth cap.
  m.store().value("cls.2.b").matrix() << 50, 0, 0;
  try {
    decode_free(m, Vector::Zero(6));
    FAIL("expected a cap error");
  } catch (const DecodeCapError& e) {
    CHECK(e.depth_exceeded());
  }
  // With a wide depth cap the leaf cap triggers first... unless nothing
  // is a leaf: "symmetry" chains never branch, so depth fires.
  m.store().value("cls.2.b").matrix() << 0, 50, 0;
  CHECK_FALSE(try_decode_free(m, Vector::Zero(6)).ok());
  // Always "leaf" gives a single leaf.
  m.store().value("cls.2.b").matrix() << 0, 0, 50;
  const auto leaf = decode_free(m, Vector::Zero(6));
  CHECK(leaf.nodes.size() == 1);
  CHECK(leaf[0].part == -1);
  // Adjacency at the root only, then leaves: caps of 1 leaf trigger.
  CHECK_THROWS_AS(decode_free(m, Vector::Zero(6), {16, 0}), DecodeCapError);
}

TEST_CASE("loss terms are non-negative and the subtree term only adds") {
  const auto m = RvnnModel::create(tiny(), 5);
  for (int k = 0; k < 5; ++k) {
    const Hierarchy h = sampled(k % 2 ? "chair" : "candelabrum", k, 8);
    Graph g(&m.store());
    const Hierarchy* trees[] = {&h};
    const auto on = reconstruction_loss(g, m, trees, {0.2, true, true});
    const auto off = reconstruction_loss(g, m, trees, {0.2, false, true});
    const double box_on = g.forward(on.box)(0, 0), box_off = g.forward(off.box)(0, 0);
    CHECK(box_off >= 0);
    CHECK(box_on >= box_off);
    const double total = g.forward(on.total)(0, 0);
    CHECK(total == doctest::Approx(box_on + g.forward(on.symmetry)(0, 0) + 0.2 * g.forward(on.classifier)(0, 0)));
    CHECK(reconstruction_loss(m, h) == doctest::Approx(total));
  }
}

TEST_CASE("reconstruction loss gradients match finite differences") {
  auto m = RvnnModel::create(tiny(), 6);
  // Larger weights so tanh units are not all in their linear range.
  Rng rng(3);
  std::normal_distribution<double> nd(0.0, 0.4);
  for (auto& e : m.store().entries()) {
    for (double& v : e.value.values()) v = nd(rng);
  }
  std::vector<Hierarchy> trees{three_level()};
  for (std::uint64_t seed = 1; trees.size() < 4; ++seed) {
    const auto s = generate_shapes("table", 1, seed)[0];
    if (s.graph.parts.size() <= 6) {
      Rng r(seed);
      trees.push_back(sample_hierarchy(s.graph, r));
    }
  }
  std::vector<const Hierarchy*> ptrs;
  for (const auto& h : trees) ptrs.push_back(&h);
  Graph g(&m.store());
  const auto loss = reconstruction_loss(g, m, ptrs);
  GradientCheckOptions opt;
  opt.tolerance = 1e-4;
  const auto report = gradient_check(g, loss.total, m.store(), opt);
  CHECK(report.passed);
  CHECK(report.max_relative_error < 1e-4);
}

TEST_CASE("training is deterministic and overfits a tiny set") {
  std::vector<Hierarchy> data;
  {
    Hierarchy h;
    const int a = h.add_leaf(0, box(0, 0.2, 0, 0.8, 0.1, 0.6));
    const int b = h.add_leaf(1, box(0, -0.2, 0, 0.1, 0.3, 0.1));
    h.add_adjacency(b, a);
    data.push_back(h);
  }
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 1;
  cfg.seed = 4;
  auto m1 = RvnnModel::create({8, 16, 8}, 1), m2 = RvnnModel::create({8, 16, 8}, 1);
  const auto l1 = train_autoencoder(m1, data, cfg), l2 = train_autoencoder(m2, data, cfg);
  CHECK(l1.to_json().dump() == l2.to_json().dump());
  CHECK(m1.store().value("box_dec.w") == m2.store().value("box_dec.w"));

  cfg.epochs = 3000;
  cfg.learning_rate = 1e-2;
  auto m = RvnnModel::create({8, 16, 8}, 2);
  const auto log = train_autoencoder(m, data, cfg);
  CHECK(log.epochs.size() == 3001);
  CHECK(evaluate_loss(m, data, {}).box < 1e-3);
  CHECK(log.epochs.back().loss < log.epochs.front().loss / 10);
}

TEST_CASE("threaded shards reproduce the single-thread result") {
  std::vector<Hierarchy> data;
  for (int k = 0; k < 6; ++k) data.push_back(sampled("chair", k, 2));
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 6;
  auto a = RvnnModel::create(tiny(), 1), b = RvnnModel::create(tiny(), 1);
  train_autoencoder(a, data, cfg);
  cfg.threads = 3;
  train_autoencoder(b, data, cfg);
  for (const auto& name : RvnnModel::parameter_names()) {
    CHECK((a.store().value(name).matrix() - b.store().value(name).matrix()).norm() < 1e-12);
  }
}

TEST_CASE("divergence restores the last good parameters") {
  std::vector<Hierarchy> data{three_level()};
  auto m = RvnnModel::create(tiny(), 1);
  m.store().value("box_dec.b").matrix()(0, 0) = std::numeric_limits<double>::quiet_NaN();
  const auto before = m.store().value("adj_enc.1.w");
  const auto dir = std::filesystem::temp_directory_path() / "grass_test_rvnn";
  std::filesystem::create_directories(dir);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.recovery_checkpoint = dir / "last_good.json";
  std::filesystem::remove(*cfg.recovery_checkpoint);
  CHECK_THROWS_AS(train_autoencoder(m, data, cfg), DivergenceError);
  CHECK(m.store().value("adj_enc.1.w") == before);
  CHECK(std::filesystem::exists(*cfg.recovery_checkpoint));
}

TEST_CASE("checkpoints round trip") {
  const auto m = RvnnModel::create(tiny(), 12);
  const auto dir = std::filesystem::temp_directory_path() / "grass_test_rvnn";
  std::filesystem::create_directories(dir);
  save_rvnn(dir / "m.json", m);
  const auto back = load_rvnn(dir / "m.json");
  CHECK(back.config() == m.config());
  for (const auto& name : RvnnModel::parameter_names()) CHECK(back.store().value(name) == m.store().value(name));
  save_checkpoint(dir / "other.json", "grass-gan/v1", m.store());
  try {
    load_rvnn(dir / "other.json");
    FAIL("expected a FormatError");
  } catch (const FormatError& e) {
    CHECK(e.field() == "kind");
  }
  CHECK(TrainConfig::from_json(TrainConfig{}.to_json()).to_json() == TrainConfig{}.to_json());
  CHECK_THROWS_AS(TrainConfig::from_json(Json{{"lambda", 0.0}}), FormatError);
}

TEST_CASE("inference yields valid hierarchies") {
  const auto m = RvnnModel::create(tiny(), 7);
  const PartGraph two = detect_relations(std::vector<Obbd>{box(0, 0, 0, 1, 1, 1), box(1, 0, 0, 1, 1.2, 1)});
  const auto h2 = infer_hierarchy(two, m);
  CHECK(topology_key(h2) == "A(L,L)");
  for (const auto& c : kCategories) {
    for (const auto& s : generate_shapes(c, 3, 6)) {
      const auto h = infer_hierarchy(s.graph, m);
      CHECK_NOTHROW(check_hierarchy(h, s.graph, 1e-9));
      const auto h1 = infer_hierarchy(s.graph, m, {false});
      CHECK_NOTHROW(check_hierarchy(h1, s.graph, 1e-9));
    }
  }
}

TEST_CASE("inference commits the first merge of the pair with the lowest forest error") {
  // Oracle: after both merges, sum the encode-decode error of every current
  // subtree, each recomputed from its own leaves.
  auto m = RvnnModel::create(tiny(), 9);
  Rng rng(4);
  std::normal_distribution<double> nd(0.0, 0.3);
  for (auto& e : m.store().entries())
    for (double& v : e.value.values()) v = nd(rng);
  auto forest_error = [&](const ContractedGraph& g) {
    double sum = 0.0;
    for (int n : g.nodes()) {
      const Hierarchy sub = extract_subtree(g.tree(), n);
      sum += subtree_error(m, encode_root(m, sub), sub).sum;
    }
    return sum;
  };
  int checked = 0;
  for (const auto& s : generate_shapes("table", 6, 12)) {
    const ContractedGraph g(s.graph);
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> expected;
    for (const auto& c1 : mergeable_candidates(g)) {
      const ContractedGraph g1 = contract(g, c1);
      double score = forest_error(g1);
      const auto second = mergeable_candidates(g1);
      if (!second.empty()) {
        score = std::numeric_limits<double>::infinity();
        for (const auto& c2 : second) score = std::min(score, forest_error(contract(g1, c2)));
      }
      if (score < best - 1e-12) {
        best = score;
        expected = g1.tree()[g1.nodes().back()].parts;
      }
    }
    std::vector<std::vector<int>> merges;
    infer_hierarchy(s.graph, m, {}, &merges);
    REQUIRE_FALSE(merges.empty());
    CHECK(merges.front() == expected);
    ++checked;
  }
  CHECK(checked == 6);
}

TEST_CASE("untrained classifier is near chance") {
  // Class-balanced accuracy, so a constant predictor scores exactly 1/3.
  const auto m = RvnnModel::create({}, 17);
  std::array<int, 3> hit{}, total{};
  for (int k = 0; k < 20; ++k) {
    const Hierarchy h = sampled(k % 2 ? "chair" : "candelabrum", k, 31);
    const auto d = decode_known(m, encode_root(m, h), h);
    for (int i = 0; i <= h.root(); ++i) {
      int pred = 0;
      m.classify_node(*d[i].code).maxCoeff(&pred);
      const int truth = node_class(h[i].type);
      ++total[truth];
      hit[truth] += pred == truth;
    }
  }
  double acc = 0.0;
  for (int c = 0; c < 3; ++c) acc += total[c] ? hit[c] / double(total[c]) / 3.0 : 0.0;
  CHECK(std::abs(acc - 1.0 / 3.0) <= 0.1);
}
