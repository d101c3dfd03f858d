#include "grass/core/random.hpp"
#include "grass/data/generator.hpp"
#include "grass/sampler/sampler.hpp"
#include "grass/shape/relations.hpp"

#include <doctest.h>

#include <functional>
#include <map>

using namespace grass;

namespace {

Obbd cube(double x, double y = 0, double z = 0, double s = 1.0) {
  Obbd b;
  b.center = Vec3d(x, y, z);
  b.dims = Vec3d(s, s, s);
  return b;
}

PartGraph chain3() {
  // Non-congruent so no symmetry is found.
  return detect_relations(std::vector<Obbd>{cube(0), cube(0.95, 0, 0, 0.9), cube(1.95, 0, 0, 1.1)});
}

using Kind = MergeCandidate::Kind;

bool any_symmetry(const Hierarchy& h) {
  return std::any_of(h.nodes.begin(), h.nodes.end(), [](const HierarchyNode& n) { return n.type == NodeType::symmetry; });
}

// Exhaustive expectation over uniform merge sequences.
double exact_probability(const ContractedGraph& g, const std::function<bool(const ContractedGraph&)>& event) {
  if (g.size() == 1) return event(g) ? 1.0 : 0.0;
  const auto cands = mergeable_candidates(g);
  double p = 0.0;
  for (const auto& c : cands) p += exact_probability(contract(g, c), event) / static_cast<double>(cands.size());
  return p;
}

ShapeRecord square_four_leg_chair() {
  for (std::uint64_t seed = 1;; ++seed) {
    auto s = generate_shape("chair", "four-leg", seed);
    if (s.graph.parts.size() == 6 && s.graph.symmetries.size() == 1 &&
        s.graph.symmetries[0].spec.kind == SymmetryKind::rotational) {
      return s;
    }
  }
}

}  // namespace

TEST_CASE("candidate enumeration") {
  const PartGraph g = chain3();
  REQUIRE(g.symmetries.empty());
  const ContractedGraph cg(g);
  const auto c = mergeable_candidates(cg);
  REQUIRE(c.size() == 2);
  CHECK(c[0] == MergeCandidate{Kind::adjacency, {0, 1}, {}});
  CHECK(c[1] == MergeCandidate{Kind::adjacency, {1, 2}, {}});

  const ContractedGraph single(detect_relations(std::vector<Obbd>{cube(0)}));
  CHECK(mergeable_candidates(single).empty());

  const auto two = contract(cg, c[0]);
  CHECK(two.size() == 2);
  CHECK(two.edges().size() == 1);
  CHECK(cg.size() == 3);
}

TEST_CASE("rotational legs plus seat candidates match an enumeration oracle") {
  const auto chair = square_four_leg_chair();
  const ContractedGraph cg(chair.graph);
  const auto cands = mergeable_candidates(cg);
  // Oracle: one candidate per input edge plus the single leg group.
  std::set<std::vector<int>> expected_adj;
  for (const auto& [a, b] : chair.graph.adjacency) expected_adj.insert({a, b});
  std::set<std::vector<int>> adj;
  int sym = 0;
  for (const auto& c : cands) {
    if (c.kind == Kind::adjacency) {
      adj.insert(c.nodes);
    } else {
      ++sym;
      CHECK(c.spec.fold == 4);
      std::vector<int> m = c.nodes;
      std::sort(m.begin(), m.end());
      std::vector<int> legs = chair.graph.symmetries[0].members;
      std::sort(legs.begin(), legs.end());
      CHECK(m == legs);
      CHECK(c.nodes.front() == chair.graph.symmetries[0].generator);
    }
  }
  CHECK(adj == expected_adj);
  CHECK(sym == 1);
  // Every leg touches the seat (part 0).
  for (int leg : chair.graph.symmetries[0].members) CHECK(adj.count({0, leg}) == 1);
}

TEST_CASE("adjacency merge of one member drops the symmetry relation") {
  const auto chair = square_four_leg_chair();
  const ContractedGraph cg(chair.graph);
  const int leg = chair.graph.symmetries[0].members[1];
  const auto after = contract(cg, {Kind::adjacency, {0, leg}, {}});
  CHECK(after.symmetries().empty());
  CHECK(after.size() == 5);
  // Merged node keeps the seat's edges to the other legs and the back.
  const int merged = after.nodes().back();
  CHECK(after.edges().size() == 4);
  for (const auto& [a, b] : after.edges()) CHECK((a == merged || b == merged));
  // The seat node is no longer current.
  CHECK_THROWS_AS(contract(after, {Kind::adjacency, {0, leg}, {}}), std::invalid_argument);
}

TEST_CASE("single part and pair") {
  Rng rng(1);
  const auto h1 = sample_hierarchy(detect_relations(std::vector<Obbd>{cube(0)}), rng);
  REQUIRE(h1.nodes.size() == 1);
  CHECK(h1[0].type == NodeType::leaf);
  const auto h2 = sample_hierarchy(detect_relations(std::vector<Obbd>{cube(0), cube(1, 0, 0, 1.2)}), rng);
  CHECK(topology_key(h2) == "A(L,L)");
  CHECK(h2[h2[h2.root()].left].part == 0);
}

TEST_CASE("chain A-B-C gives two hierarchies with equal frequency") {
  const PartGraph g = chain3();
  Rng rng(2024);
  std::map<std::vector<int>, int> freq;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const auto h = sample_hierarchy(g, rng);
    // Identify the hierarchy by the parts of the root's two children.
    const auto& r = h[h.root()];
    const auto& l = h[r.left].parts.size() == 2 ? h[r.left].parts : h[r.right].parts;
    ++freq[l];
  }
  REQUIRE(freq.size() == 2);
  for (const auto& [k, v] : freq) {
    CHECK(v / double(n) == doctest::Approx(0.5).epsilon(0.1));
    CHECK(std::abs(v / double(n) - 0.5) <= 0.05);
  }
  CHECK(exact_probability(ContractedGraph(g), [](const ContractedGraph& c) {
          const auto h = c.hierarchy();
          const auto& r = h[h.root()];
          return h[r.left].parts == std::vector<int>{0, 1} || h[r.right].parts == std::vector<int>{0, 1};
        }) == doctest::Approx(0.5));
}

TEST_CASE("merging terminates within the step bound on random graphs") {
  Rng rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = uniform_int(rng, 1, 8);
    // Random tree of touching cubes in a row plus optional congruent pairs.
    std::vector<Obbd> boxes;
    for (int i = 0; i < n; ++i) boxes.push_back(cube(i * 1.0, 0, 0, 1.0 + 0.01 * uniform_int(rng, 0, 2)));
    const PartGraph g = detect_relations(boxes);
    const std::size_t bound = g.parts.size() - 1 + g.symmetries.size();
    // Exhaustive over all merge sequences.
    std::function<void(const ContractedGraph&, std::size_t)> walk = [&](const ContractedGraph& cg, std::size_t steps) {
      const auto c = mergeable_candidates(cg);
      if (c.empty()) {
        CHECK(cg.size() == 1);
        CHECK(steps <= bound);
        return;
      }
      for (const auto& m : c) walk(contract(cg, m), steps + 1);
    };
    if (n <= 6) walk(ContractedGraph(g), 0);
    std::vector<MergeCandidate> trail;
    sample_hierarchy(g, rng, &trail);
    CHECK(trail.size() <= bound);
  }
}

TEST_CASE("sampled hierarchies are valid and replayable") {
  Rng rng(77);
  for (const auto& c : kCategories) {
    for (const auto& s : generate_shapes(c, 12, 3)) {
      INFO(s.id);
      std::vector<MergeCandidate> trail;
      const auto h = sample_hierarchy(s.graph, rng, &trail);
      CHECK_NOTHROW(check_hierarchy(h, s.graph, 1e-9));
      // Replay: each chosen step is a legal candidate at its time.
      ContractedGraph cg(s.graph);
      for (const auto& step : trail) {
        const auto cands = mergeable_candidates(cg);
        REQUIRE(std::find(cands.begin(), cands.end(), step) != cands.end());
        if (step.kind == Kind::adjacency) CHECK(cg.edges().count({step.nodes[0], step.nodes[1]}) == 1);
        cg.merge(step);
      }
      CHECK(cg.hierarchy() == h);
    }
  }
}

TEST_CASE("training hierarchies") {
  const auto s = generate_shapes("chair", 3, 8)[1];
  Rng a(3), b(3);
  const auto ha = training_hierarchies(s, 20, a);
  const auto hb = training_hierarchies(s, 20, b);
  CHECK(ha.size() == 20);
  CHECK(ha == hb);
  for (const auto& h : ha) CHECK_NOTHROW(check_hierarchy(h, s.graph));

  PartGraph broken;
  broken.parts = {{0, "", cube(0)}, {1, "", cube(5)}};
  Rng r(1);
  CHECK_THROWS_AS(sample_hierarchy(broken, r), GraphInvariantError);
}

TEST_CASE("symmetry use frequency on a rotational four-leg chair follows the candidate-count oracle") {
  const auto chair = square_four_leg_chair();
  // Oracle 1: the group survives only if it is picked before any of the four
  // seat-leg edges, while the seat-back edge is neutral: 1 / (1 + 4).
  const double closed_form = 1.0 / 5.0;
  // Oracle 2: exhaustive expectation over merge sequences.
  const double exact =
      exact_probability(ContractedGraph(chair.graph), [](const ContractedGraph& c) { return any_symmetry(c.hierarchy()); });
  CHECK(exact == doctest::Approx(closed_form).epsilon(1e-12));

  Rng rng(42);
  const auto hs = training_hierarchies(chair, 1000, rng);
  const double freq = std::count_if(hs.begin(), hs.end(), any_symmetry) / 1000.0;
  CHECK(std::abs(freq - exact) <= 0.04);
  // With 20 samples at least one uses the group with probability 1 - 0.8^20.
  Rng small(9);
  const auto h20 = training_hierarchies(chair, 20, small);
  CHECK(std::any_of(h20.begin(), h20.end(), any_symmetry));
}

TEST_CASE("compound symmetry appears once both sides are assembled") {
  // Bar with a two-block stack at each end, mirrored across x = 0.
  auto box = [](double x, double y, double w, double h) {
    Obbd b;
    b.center = Vec3d(x, y, 0);
    b.dims = Vec3d(w, h, 0.1);
    return b;
  };
  const PartGraph g = detect_relations(std::vector<Obbd>{box(0, 0, 1.2, 0.2), box(-0.5, 0.2, 0.2, 0.2),
                                                         box(-0.5, 0.45, 0.1, 0.3), box(0.5, 0.2, 0.2, 0.2),
                                                         box(0.5, 0.45, 0.1, 0.3)});
  REQUIRE(g.symmetries.size() == 2);
  ContractedGraph cg(g);
  cg.merge({Kind::adjacency, {1, 2}, {}});
  CHECK(cg.symmetries().empty());
  const int right = cg.merge({Kind::adjacency, {3, 4}, {}});
  REQUIRE(cg.symmetries().size() == 1);
  const auto& s = cg.symmetries()[0];
  CHECK(s.spec.kind == SymmetryKind::reflective);
  CHECK(s.nodes.size() == 2);
  CHECK(s.nodes.back() == right);
  cg.merge(s);
  cg.merge(mergeable_candidates(cg).at(0));
  const auto h = cg.hierarchy();
  CHECK(topology_key(h) == "A(L,S(A(L,L)))");
  CHECK_NOTHROW(check_hierarchy(h, g));
}
