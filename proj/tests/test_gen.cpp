#include "grass/core/gradient_check.hpp"
#include "grass/core/random.hpp"
#include "grass/data/generator.hpp"
#include "grass/gen/gan.hpp"
#include "grass/rvnn/infer.hpp"
#include "grass/sampler/sampler.hpp"

#include <doctest.h>

#include <filesystem>

using namespace grass;

namespace {

Matrix row(const Vector& v) { return v.transpose(); }

GanModel tiny_gan(std::uint64_t seed = 1) {
  GanConfig c;
  c.fl_hidden = 5;
  c.disc_hidden = 4;
  c.seed = seed;
  return GanModel::create(RvnnModel::create({6, 5, 4}, seed), c);
}

std::vector<PartGraph> chairs(int count, std::uint64_t seed) {
  std::vector<PartGraph> out;
  for (const auto& s : generate_shapes("chair", count, seed)) out.push_back(s.graph);
  return out;
}

// Decode along a topology and re-encode with single-row model calls, keeping
// raw decoder outputs for boxes and symmetry parameters.
Vector redecode(const RvnnModel& m, const Vector& code, const Hierarchy& h, int i) {
  const auto& node = h[i];
  switch (node.type) {
    case NodeType::leaf:
      return m.leaf_encoder(m.leaf_decoder(row(code))).row(0).transpose();
    case NodeType::adjacency: {
      const auto [l, r] = m.decode_adj(code);
      return m.encode_adj(redecode(m, l, h, node.left), redecode(m, r, h, node.right));
    }
    case NodeType::symmetry: {
      const Matrix out = m.sym_decoder(row(code));
      const Vector child = out.row(0).head(m.n()).transpose();
      const Matrix params = out.rightCols(kSymmetryVectorSize);
      return m.sym_encoder(row(redecode(m, child, h, node.left)), params).row(0).transpose();
    }
  }
  return {};
}

double brute_score(const GanModel& gan, const Vector& z, const Hierarchy& h) {
  const double d = gan.discriminate(redecode(gan.rvnn(), gan.project(z), h, h.root()));
  return -0.5 * std::log(d);
}

PlausibleSet library_of(const std::vector<PartGraph>& shapes, int per_shape, std::uint64_t seed) {
  PlausibleSet set;
  Rng rng(seed);
  for (const auto& g : shapes) {
    for (const auto& h : training_hierarchies(g, per_shape, rng)) set.add(h);
  }
  return set;
}

}  // namespace

TEST_CASE("adversarial losses match hand evaluation") {
  const double one[] = {1.0}, zero[] = {0.0}, half[] = {0.5};
  CHECK(loss_jd(one, zero) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(loss_jd(half, half) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  const double r[] = {0.8}, f[] = {0.3};
  CHECK(std::abs(loss_jd(r, f) - (-0.5 * std::log(0.8) - 0.5 * std::log(0.7))) < 1e-12);
  CHECK(loss_jd(r, f) == doctest::Approx(0.2899).epsilon(1e-4));
  CHECK(loss_jg(f) == doctest::Approx(0.6020).epsilon(1e-4));

  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> dr(1 + trial % 7), df(1 + trial % 5);
    for (double& p : dr) p = uniform(rng, 0.01, 0.99);
    for (double& p : df) p = uniform(rng, 0.01, 0.99);
    // Products of probabilities: an independent form of the mean log.
    double pr = 1.0, pf = 1.0, qf = 1.0;
    for (double p : dr) pr *= p;
    for (double p : df) {
      pf *= 1.0 - p;
      qf *= p;
    }
    CHECK(std::abs(loss_jd(dr, df) - (-0.5 * std::log(pr) / dr.size() - 0.5 * std::log(pf) / df.size())) < 1e-12);
    CHECK(std::abs(loss_jg(df) - (-0.5 * std::log(qf) / df.size())) < 1e-12);
  }
  // Clamping keeps saturated discriminators finite.
  CHECK(std::isfinite(loss_jd(zero, one)));
  CHECK(loss_jg(zero) == doctest::Approx(-0.5 * std::log(1e-7)));
}

TEST_CASE("Gaussian KL matches closed form and Monte Carlo") {
  CHECK(kl_diag_gaussian(Vector::Zero(5), Vector::Zero(5)) == 0.0);
  CHECK(kl_diag_gaussian(Vector::Unit(5, 0), Vector::Zero(5)) == doctest::Approx(0.5).epsilon(1e-15));
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    Vector mu(4), lv(4);
    for (int i = 0; i < 4; ++i) {
      mu[i] = uniform(rng, -3, 3);
      lv[i] = uniform(rng, -2, 2);
    }
    CHECK(kl_diag_gaussian(mu, lv) >= 0.0);
  }
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int trial = 0; trial < 3; ++trial) {
    Vector mu(3), lv(3);
    for (int i = 0; i < 3; ++i) {
      mu[i] = uniform(rng, -2, 2);
      lv[i] = uniform(rng, -1, 1);
    }
    // E_q[log q(z) - log p(z)] with z = mu + sigma * e.
    double sum = 0.0;
    const int samples = 1000000;
    for (int s = 0; s < samples; ++s) {
      double d = 0.0;
      for (int i = 0; i < 3; ++i) {
        const double e = nd(rng), z = mu[i] + std::exp(0.5 * lv[i]) * e;
        d += -0.5 * lv[i] - 0.5 * e * e + 0.5 * z * z;
      }
      sum += d;
    }
    CHECK(std::abs(sum / samples - kl_diag_gaussian(mu, lv)) < 1e-2);
  }
}

TEST_CASE("model heads have the stated shapes") {
  const auto gan = GanModel::create(RvnnModel::create({}, 1), {});
  const auto& s = gan.rvnn().store();
  CHECK(s.value("disc.1.w").rows() == 100);
  CHECK(s.value("disc.1.w").cols() == 80);
  CHECK(s.value("disc.2.w").rows() == 2);
  CHECK(s.value("fl.1.w").cols() == 80);
  CHECK(s.value("fl.2.w").rows() == 80);
  CHECK(s.value("fmu.w").rows() == 80);
  CHECK(s.value("fsigma.w").cols() == 80);
  CHECK(GanModel::head_parameter_names().size() == 12);
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    const Vector x = 10.0 * sample_latent(80, rng);
    const double d = gan.discriminate(x);
    CHECK(d > 0.0);
    CHECK(d < 1.0);
    const auto [mu, lv] = gan.latent(x);
    CHECK((lv.array() * 0.5).exp().minCoeff() > 0.0);
    CHECK(gan.project(x).cwiseAbs().maxCoeff() < 1.0);
  }
}

TEST_CASE("untrained discriminator cannot tell real from generated") {
  const auto model = RvnnModel::create({}, 3);
  const auto gan = GanModel::create(model, {});
  const auto shapes = chairs(20, 5);
  const auto set = library_of(shapes, 1, 5);
  double real = 0.0, fake = 0.0;
  Rng rng(6);
  Rng pick(7);
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    real += gan.discriminate(encode_root(model, set.hierarchies[i % set.size()]));
    const Vector z = sample_latent(80, rng);
    const Hierarchy& h = set.hierarchies[pick() % set.size()];
    fake += gan.discriminate(redecode(gan.rvnn(), gan.project(z), h, h.root()));
  }
  real /= shapes.size();
  fake /= shapes.size();
  CHECK(std::abs(real - 0.5) <= 0.15);
  CHECK(std::abs(fake - 0.5) <= 0.15);
  CHECK(std::abs(real - fake) <= 0.15);
}

TEST_CASE("top-k selection agrees with brute-force scoring") {
  const auto gan = tiny_gan(3);
  PlausibleSet set = library_of(chairs(8, 2), 2, 2);
  REQUIRE(set.size() >= 5);
  set.hierarchies.resize(5);
  Rng rng(1);
  for (int trial = 0; trial < 5; ++trial) {
    const Vector z = sample_latent(6, rng);
    std::vector<double> brute;
    for (const auto& h : set.hierarchies) brute.push_back(brute_score(gan, z, h));

    const auto all = select_topk_hierarchies(gan, z, set, 5);
    REQUIRE(all.size() == 5);
    for (std::size_t i = 0; i < all.size(); ++i) {
      CHECK(all[i].score == doctest::Approx(brute[all[i].index]).epsilon(1e-10));
      if (i > 0) CHECK(all[i - 1].score <= all[i].score);
    }

    const int two[] = {1, 3};
    const auto best = select_topk_hierarchies(gan, z, set, 1, two);
    REQUIRE(best.size() == 1);
    CHECK(best[0].index == (brute[1] <= brute[3] ? 1 : 3));

    // Duplicating an entry leaves the selection unchanged.
    PlausibleSet dup = set;
    dup.hierarchies.push_back(set.hierarchies[all.front().index]);
    dup.hierarchies.insert(dup.hierarchies.begin() + 2, set.hierarchies[all.back().index]);
    const auto top3 = select_topk_hierarchies(gan, z, set, 3);
    const auto top3dup = select_topk_hierarchies(gan, z, dup, 3);
    REQUIRE(top3dup.size() == 3);
    for (int i = 0; i < 3; ++i) {
      CHECK(topology_key(dup.hierarchies[top3dup[i].index]) == topology_key(set.hierarchies[top3[i].index]));
      CHECK(top3dup[i].score == doctest::Approx(top3[i].score).epsilon(1e-12));
    }
  }
  // Fewer entries than k: everything comes back.
  CHECK(select_topk_hierarchies(gan, Vector::Zero(6), set, 10).size() == 5);
}

TEST_CASE("plausible set keeps one entry per topology") {
  PlausibleSet set;
  const auto shapes = chairs(3, 1);
  Rng rng(1);
  const auto hs = training_hierarchies(shapes[0], 10, rng);
  std::set<std::string> keys;
  for (const auto& h : hs) {
    CHECK(set.add(h) == keys.insert(topology_key(h)).second);
  }
  CHECK(set.size() == keys.size());
}

TEST_CASE("generator loss gradients match finite differences") {
  auto gan = tiny_gan(5);
  Rng rng(3);
  std::normal_distribution<double> nd(0.0, 0.4);
  for (auto& e : gan.rvnn().store().entries()) {
    for (double& v : e.value.values()) v = nd(rng);
  }
  const auto set = library_of(chairs(4, 8), 1, 8);
  Matrix z(2, 6);
  for (int i = 0; i < z.size(); ++i) z.data()[i] = nd(rng);
  std::vector<std::vector<const Hierarchy*>> per_root{{&set.hierarchies[0], &set.hierarchies[1]},
                                                      {&set.hierarchies[set.size() - 1]}};
  Graph g(&gan.rvnn().store());
  const Var logits = decoded_logits(g, gan, gan.project(g, g.constant(z)), per_root);
  const Var jg = g.softmax_cross_entropy(logits, {1, 1, 1}, {0.5 / 3, 0.5 / 3, 0.5 / 3});
  const auto report = gradient_check(g, jg, gan.rvnn().store());
  CHECK(report.passed);
  CHECK(report.max_relative_error < 1e-4);

  // The graph path scores the same structures as the single-row path.
  const auto p = g.forward(logits);
  const Hierarchy& h = set.hierarchies[set.size() - 1];
  const double d = gan.discriminate(redecode(gan.rvnn(), gan.project(Vector(z.row(1).transpose())), h, h.root()));
  CHECK(1.0 / (1.0 + std::exp(p(2, 0) - p(2, 1))) == doctest::Approx(d).epsilon(1e-12));
}

TEST_CASE("a small generator step with the discriminator frozen does not raise J_G") {
  auto gan = tiny_gan(8);
  const auto set = library_of(chairs(4, 3), 2, 3);
  Rng rng(2);
  Matrix z(4, 6);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int i = 0; i < z.size(); ++i) z.data()[i] = nd(rng);
  std::vector<std::vector<const Hierarchy*>> per_root(4);
  for (int b = 0; b < 4; ++b) per_root[b] = {&set.hierarchies[b % set.size()], &set.hierarchies[(b + 1) % set.size()]};
  auto jg = [&](GradientMap* grads) {
    Graph g(&gan.rvnn().store());
    const Var logits = decoded_logits(g, gan, gan.project(g, g.constant(z)), per_root);
    const Var loss = g.softmax_cross_entropy(logits, std::vector<int>(8, 1), std::vector<double>(8, 0.5 / 8));
    const double v = g.forward(loss)(0, 0);
    if (grads) *grads = g.backward(loss);
    return v;
  };
  GradientMap grads;
  const double before = jg(&grads);
  for (const auto& [name, grad] : grads) {
    if (name.starts_with("disc.") || name.find("_enc") != std::string::npos) continue;
    gan.rvnn().store().value(name).matrix() -= 1e-3 * grad;
  }
  CHECK(jg(nullptr) <= before);
}

TEST_CASE("adversarial training is deterministic and recovers from divergence") {
  const auto model = RvnnModel::create({6, 5, 4}, 2);
  const GanDataset data = make_gan_dataset(model, chairs(6, 4), 2, 4);
  CHECK(data.real.size() == 6);
  CHECK(data.library.size() >= 1);
  GanConfig cfg;
  cfg.fl_hidden = 5;
  cfg.disc_hidden = 4;
  cfg.epochs = 2;
  cfg.batch_size = 3;
  cfg.top_k = 2;
  cfg.library_sample = 4;
  auto a = GanModel::create(model, cfg), b = GanModel::create(model, cfg);
  const auto la = train_vaegan(a, data), lb = train_vaegan(b, data);
  CHECK(la.epochs.size() == 2);
  CHECK(la.to_json().dump() == lb.to_json().dump());
  for (const auto& e : a.rvnn().store().entries()) CHECK(e.value == b.rvnn().store().value(e.name));
  // The discriminator and generator both moved; the frozen-encoder default
  // still lets J_D move the shared encoder.
  CHECK_FALSE(a.rvnn().store().value("disc.1.w") == GanModel::create(model, cfg).rvnn().store().value("disc.1.w"));
  CHECK_FALSE(a.rvnn().store().value("fl.2.w") == GanModel::create(model, cfg).rvnn().store().value("fl.2.w"));
  CHECK_FALSE(a.rvnn().store().value("cls.2.w") == model.store().value("cls.2.w"));

  const auto dir = std::filesystem::temp_directory_path() / "grass_test_gen";
  std::filesystem::create_directories(dir);
  cfg.recovery_checkpoint = dir / "last_good.json";
  std::filesystem::remove(*cfg.recovery_checkpoint);
  auto broken = GanModel::create(model, cfg);
  broken.rvnn().store().value("fmu.b").matrix()(0, 0) = std::numeric_limits<double>::quiet_NaN();
  const auto before = broken.rvnn().store().value("disc.1.w");
  CHECK_THROWS_AS(train_vaegan(broken, data), DivergenceError);
  CHECK(broken.rvnn().store().value("disc.1.w") == before);
  CHECK(std::filesystem::exists(*cfg.recovery_checkpoint));
}

TEST_CASE("generation is deterministic and reports validity") {
  const auto gan = tiny_gan(4);
  Rng rng(11);
  for (int i = 0; i < 10; ++i) {
    const Vector z = sample_latent(6, rng);
    const auto a = generate_structure(gan, z), b = generate_structure(gan, z);
    CHECK(a.report.valid() == b.report.valid());
    CHECK(a.hierarchy.has_value() == b.hierarchy.has_value());
    if (a.hierarchy) {
      CHECK(topology_key(*a.hierarchy) == topology_key(*b.hierarchy));
      CHECK(expand_boxes(*a.hierarchy).size() == expand_boxes(*b.hierarchy).size());
      CHECK(a.report.terminated);
    } else {
      CHECK_FALSE(a.report.terminated);
      CHECK_FALSE(a.report.error.empty());
    }
  }
  auto always_adj = gan;
  always_adj.rvnn().store().value("cls.2.b").matrix() << 50, 0, 0;
  const auto runaway = generate_structure(always_adj, Vector::Zero(6));
  CHECK_FALSE(runaway.report.terminated);
  CHECK_FALSE(runaway.report.valid());

  Obbd box;
  box.dims = Vec3d(0.2, 0.2, 0.2);
  Hierarchy ok;
  ok.add_leaf(0, box);
  CHECK(check_validity(ok).valid());
  Hierarchy far = ok;
  far[0].box.center = Vec3d(2.95, 0, 0);
  CHECK_FALSE(check_validity(far).within_bounds);
  Hierarchy flat = ok;
  flat[0].box.dims.z() = 0.0;
  CHECK_FALSE(check_validity(flat).boxes_valid);
  Hierarchy sym = ok;
  SymmetrySpecd s;
  s.kind = SymmetryKind::rotational;
  s.fold = 17;
  s.direction = Vec3d::UnitY();
  sym.add_symmetry(0, s);
  CHECK_FALSE(check_validity(sym).folds_in_range);
  sym[1].sym.fold = 16;
  CHECK(check_validity(sym).valid());
}

TEST_CASE("interpolation endpoints reproduce the source reconstructions") {
  const auto gan = tiny_gan(6);
  const auto shapes = generate_shapes("chair", 2, 12);
  const auto path = interpolate_structures(gan, shapes[0].graph, shapes[1].graph, 8);
  CHECK(path.size() == 8);
  for (int e : {0, 1}) {
    const Vector root = encode_root(gan.rvnn(), infer_hierarchy(shapes[e].graph, gan.rvnn()));
    const auto ref = decode_structure(gan, root);
    const auto& got = path[e == 0 ? 0 : 7];
    REQUIRE(got.hierarchy.has_value() == ref.hierarchy.has_value());
    if (ref.hierarchy) {
      REQUIRE(got.hierarchy->nodes.size() == ref.hierarchy->nodes.size());
      for (std::size_t i = 0; i < ref.hierarchy->nodes.size(); ++i) {
        CHECK(*got.hierarchy->nodes[i].code == *ref.hierarchy->nodes[i].code);
      }
    }
  }
  CHECK(interpolate_structures(gan, shapes[0].graph, shapes[1].graph, 1).size() == 1);
  CHECK_THROWS_AS(interpolate_structures(gan, shapes[0].graph, shapes[1].graph, 0), std::invalid_argument);
}

TEST_CASE("generator checkpoints round trip") {
  const auto gan = tiny_gan(2);
  const auto dir = std::filesystem::temp_directory_path() / "grass_test_gen";
  std::filesystem::create_directories(dir);
  save_gan(dir / "g.json", gan);
  const auto back = load_gan(dir / "g.json");
  CHECK(back.config().to_json() == gan.config().to_json());
  CHECK(back.rvnn().config() == gan.rvnn().config());
  for (const auto& e : gan.rvnn().store().entries()) CHECK(back.rvnn().store().value(e.name) == e.value);
  save_rvnn(dir / "r.json", gan.rvnn());
  try {
    load_gan(dir / "r.json");
    FAIL("expected a FormatError");
  } catch (const FormatError& e) {
    CHECK(e.field() == "kind");
  }
  CHECK_THROWS_AS(load_rvnn(dir / "g.json"), FormatError);
  CHECK_THROWS_AS(GanConfig::from_json(Json{{"alpha2", -1.0}}), FormatError);
  CHECK(GanConfig::from_json(Json::object()).alpha1 == 1e-2);
  CHECK(GanConfig::from_json(Json::object()).alpha2 == 10.0);
  CHECK(GanConfig::from_json(Json::object()).top_k == 10);
}
