#include "grass/gen/gan.hpp"

#include "grass/core/random.hpp"
#include "grass/rvnn/infer.hpp"
#include "grass/rvnn/train.hpp"
#include "grass/sampler/sampler.hpp"
#include "grass/shape/json.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <set>
#include <thread>
#include <tuple>

namespace grass {

namespace {

constexpr double kProbabilityClamp = 1e-7;
constexpr double kBoundRadius = 3.0;

struct Layer {
  std::string name;
  int out;
  int in;
};

std::vector<Layer> head_layers(int n, const GanConfig& c) {
  return {{"disc.1", c.disc_hidden, n}, {"disc.2", 2, c.disc_hidden}, {"fl.1", c.fl_hidden, n},
          {"fl.2", n, c.fl_hidden},     {"fmu", n, n},                  {"fsigma", n, n}};
}

Matrix row(const Vector& v) { return v.transpose(); }

double clamp_p(double p) { return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp); }

// Probability of class 1 from two-column logits.
std::vector<double> real_probability(const Matrix& logits) {
  std::vector<double> p(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) p[i] = 1.0 / (1.0 + std::exp(logits(i, 0) - logits(i, 1)));
  return p;
}

// Decoding of roots along library topologies, re-encoding of the decoded
// boxes and symmetries, and the discriminator on the re-encoded roots.
struct FakePass {
  std::vector<const Hierarchy*> trees;
  std::vector<int> owner;
  BatchDecoding dec;
  Var logits;
};

FakePass fake_pass(Graph& g, const GanModel& gan, Var roots, const std::vector<std::vector<const Hierarchy*>>& per_root) {
  FakePass f;
  std::vector<DecodeJob> jobs;
  for (std::size_t b = 0; b < per_root.size(); ++b) {
    for (const Hierarchy* h : per_root[b]) {
      jobs.push_back({int(f.trees.size()), h->root(), {roots, int(b)}});
      f.trees.push_back(h);
      f.owner.push_back(int(b));
    }
  }
  f.dec = decode_batch(g, gan.rvnn(), f.trees, jobs);
  EncoderInputs in;
  in.boxes.resize(f.trees.size());
  in.symmetries.resize(f.trees.size());
  for (std::size_t t = 0; t < f.trees.size(); ++t) {
    in.boxes[t].resize(f.trees[t]->nodes.size());
    in.symmetries[t].resize(f.trees[t]->nodes.size());
  }
  for (const auto& d : f.dec.boxes) in.boxes[d.tree][d.node] = d.value;
  for (const auto& d : f.dec.symmetries) in.symmetries[d.tree][d.node] = d.value;
  const BatchEncoding enc = encode_batch(g, gan.rvnn(), f.trees, &in);
  std::vector<RowRef> r;
  for (std::size_t t = 0; t < f.trees.size(); ++t) r.push_back(enc.codes[t][f.trees[t]->root()]);
  f.logits = gan.discriminator_logits(g, g.gather_rows(r));
  return f;
}

// Candidate indices with one entry per topology, in index order.
std::vector<int> unique_candidates(const PlausibleSet& set, std::span<const int> subset) {
  std::vector<int> all;
  if (subset.empty()) {
    all.resize(set.size());
    std::iota(all.begin(), all.end(), 0);
  } else {
    all.assign(subset.begin(), subset.end());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
  }
  std::set<std::string> seen;
  std::vector<int> out;
  for (int i : all) {
    if (i < 0 || i >= int(set.size())) throw std::out_of_range("library index " + std::to_string(i));
    if (seen.insert(topology_key(set.hierarchies[i])).second) out.push_back(i);
  }
  return out;
}

// Top-k selection for every row of `z`; rows are split across threads.
std::vector<std::vector<ScoredHierarchy>> score_batch(const GanModel& gan, const Matrix& z, const PlausibleSet& set,
                                                      const std::vector<int>& candidates, int k, int threads) {
  std::vector<std::vector<ScoredHierarchy>> out(static_cast<std::size_t>(z.rows()));
  auto work = [&](Eigen::Index begin, Eigen::Index end) {
    if (begin >= end) return;
    Graph g(&gan.rvnn().store());
    const Var roots = gan.project(g, g.constant(Matrix(z.middleRows(begin, end - begin))));
    std::vector<const Hierarchy*> lib;
    for (int i : candidates) lib.push_back(&set.hierarchies[i]);
    const FakePass f = fake_pass(g, gan, roots, std::vector(static_cast<std::size_t>(end - begin), lib));
    const auto p = real_probability(g.forward(f.logits));
    for (std::size_t t = 0; t < f.trees.size(); ++t) {
      const double d = p[t];
      out[begin + f.owner[t]].push_back({candidates[t % candidates.size()], d, -0.5 * std::log(clamp_p(d))});
    }
  };
  const int parts = std::max(1, std::min<int>(threads, int(z.rows())));
  if (parts == 1) {
    work(0, z.rows());
  } else {
    std::vector<std::thread> pool;
    const Eigen::Index chunk = (z.rows() + parts - 1) / parts;
    for (int p = 0; p < parts; ++p) pool.emplace_back(work, p * chunk, std::min(z.rows(), (p + 1) * chunk));
    for (auto& t : pool) t.join();
  }
  for (auto& s : out) {
    std::stable_sort(s.begin(), s.end(), [](const auto& a, const auto& b) {
      return std::tie(a.score, a.index) < std::tie(b.score, b.index);
    });
    if (int(s.size()) > k) s.resize(static_cast<std::size_t>(k));
  }
  return out;
}

// One optimizer per parameter group, stepping a shared store.
class ParamGroup {
 public:
  ParamGroup(const ParameterStore& source, const std::vector<std::string>& names, OptimizerConfig config)
      : config_(config) {
    for (const auto& name : names) store_.add(name, source.value(name));
  }

  void step(ParameterStore& target, const GradientMap& grads) {
    for (auto& e : store_.entries()) {
      e.value = target.value(e.name);
      if (const auto it = grads.find(e.name); it != grads.end()) e.grad = it->second;
    }
    adam_step(store_, config_);
    for (const auto& e : store_.entries()) target.value(e.name) = e.value;
  }

 private:
  ParameterStore store_;
  OptimizerConfig config_;
};

std::vector<std::string> with_params(const std::vector<std::string>& layers) {
  std::vector<std::string> out;
  for (const auto& l : layers) {
    out.push_back(l + ".w");
    out.push_back(l + ".b");
  }
  return out;
}

const std::vector<std::string> kEncoderLayers{"box_enc", "adj_enc.1", "adj_enc.2", "sym_enc.1", "sym_enc.2"};

Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = nd(rng);
  }
  return m;
}

}  // namespace

Json GanConfig::to_json() const {
  return {{"alpha1", alpha1},
          {"alpha2", alpha2},
          {"top_k", top_k},
          {"library_sample", library_sample},
          {"d_learning_rate", d_learning_rate},
          {"g_learning_rate", g_learning_rate},
          {"d_steps", d_steps},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"fl_hidden", fl_hidden},
          {"disc_hidden", disc_hidden},
          {"tune_encoder", tune_encoder},
          {"seed", seed},
          {"threads", threads}};
}

GanConfig GanConfig::from_json(const Json& j, const std::string& path) {
  GanConfig c;
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("alpha1", c.alpha1);
    get("alpha2", c.alpha2);
    get("top_k", c.top_k);
    get("library_sample", c.library_sample);
    get("d_learning_rate", c.d_learning_rate);
    get("g_learning_rate", c.g_learning_rate);
    get("d_steps", c.d_steps);
    get("epochs", c.epochs);
    get("batch_size", c.batch_size);
    get("fl_hidden", c.fl_hidden);
    get("disc_hidden", c.disc_hidden);
    get("tune_encoder", c.tune_encoder);
    get("seed", c.seed);
    get("threads", c.threads);
  } catch (const std::exception& e) {
    throw FormatError(path, "config", e.what());
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(path, "config", e.what());
  }
  return c;
}

void GanConfig::validate() const {
  if (!(alpha1 > 0) || !(alpha2 > 0)) throw std::invalid_argument("alpha1 and alpha2 must be positive");
  if (top_k < 1 || library_sample < 1) throw std::invalid_argument("top_k and library_sample must be positive");
  if (!(d_learning_rate > 0) || !(g_learning_rate > 0)) throw std::invalid_argument("learning rates must be positive");
  if (d_steps < 1) throw std::invalid_argument("d_steps must be positive");
  if (epochs < 0) throw std::invalid_argument("epochs must be non-negative");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be positive");
  if (fl_hidden < 1 || disc_hidden < 1) throw std::invalid_argument("hidden sizes must be positive");
  if (threads < 1) throw std::invalid_argument("threads must be positive");
}

GanModel::GanModel(RvnnModel model, GanConfig config) : model_(std::move(model)), config_(std::move(config)) {
  for (const auto& l : head_layers(model_.n(), config_)) {
    for (const auto& [name, rows, cols] : {std::tuple{l.name + ".w", l.out, l.in}, std::tuple{l.name + ".b", 1, l.out}}) {
      if (!model_.store().contains(name)) throw std::invalid_argument("gan parameter " + name + " is missing");
      const auto& t = model_.store().value(name);
      if (t.rows() != rows || t.cols() != cols) throw ShapeError("gan parameter " + name + " has shape " + t.shape_string());
    }
  }
}

GanModel GanModel::create(const RvnnModel& pretrained, const GanConfig& config) {
  config.validate();
  ParameterStore store = pretrained.store();
  for (auto& e : store.entries()) {
    e.adam_m = Matrix();
    e.adam_v = Matrix();
    e.grad.setZero();
  }
  store.step_count = 0;
  Rng rng(derive_seed(config.seed, 101));
  for (const auto& l : head_layers(pretrained.n(), config)) {
    store.add_gaussian(l.name + ".w", {l.out, l.in}, rng);
    store.add_zeros(l.name + ".b", {l.out});
  }
  return GanModel(RvnnModel(pretrained.config(), std::move(store)), config);
}

std::vector<std::string> GanModel::head_parameter_names() {
  std::vector<std::string> layers;
  for (const auto& l : head_layers(1, GanConfig{})) layers.push_back(l.name);
  return with_params(layers);
}

Var GanModel::discriminator_logits(Graph& g, Var codes) const {
  return g.linear(g.tanh(g.linear(codes, "disc.1.w", "disc.1.b")), "disc.2.w", "disc.2.b");
}

Var GanModel::project(Graph& g, Var z) const {
  return g.tanh(g.linear(g.tanh(g.linear(z, "fl.1.w", "fl.1.b")), "fl.2.w", "fl.2.b"));
}

Var GanModel::latent_mean(Graph& g, Var encoded) const { return g.linear(encoded, "fmu.w", "fmu.b"); }

Var GanModel::latent_logvar(Graph& g, Var encoded) const { return g.linear(encoded, "fsigma.w", "fsigma.b"); }

Matrix GanModel::dense(const Matrix& x, const std::string& layer) const {
  const Matrix& w = model_.store().value(layer + ".w").matrix();
  Matrix out = x * w.transpose();
  out.rowwise() += model_.store().value(layer + ".b").matrix().row(0);
  return out;
}

double GanModel::discriminate(const Vector& root) const {
  const Matrix h = dense(row(root), "disc.1").array().tanh();
  return real_probability(dense(h, "disc.2"))[0];
}

Vector GanModel::project(const Vector& z) const {
  const Matrix h = dense(row(z), "fl.1").array().tanh();
  return Matrix(dense(h, "fl.2").array().tanh()).row(0).transpose();
}

std::pair<Vector, Vector> GanModel::latent(const Vector& encoded) const {
  return {dense(row(encoded), "fmu").row(0).transpose(), dense(row(encoded), "fsigma").row(0).transpose()};
}

double loss_jd(std::span<const double> d_real, std::span<const double> d_fake) {
  if (d_real.empty() || d_fake.empty()) throw std::invalid_argument("loss_jd needs real and fake samples");
  double r = 0.0, f = 0.0;
  for (double p : d_real) r += std::log(clamp_p(p));
  for (double p : d_fake) f += std::log(1.0 - clamp_p(p));
  return -0.5 * r / double(d_real.size()) - 0.5 * f / double(d_fake.size());
}

double loss_jg(std::span<const double> d_fake) {
  if (d_fake.empty()) throw std::invalid_argument("loss_jg needs fake samples");
  double f = 0.0;
  for (double p : d_fake) f += std::log(clamp_p(p));
  return -0.5 * f / double(d_fake.size());
}

double kl_diag_gaussian(const Vector& mu, const Vector& logvar) {
  if (mu.size() != logvar.size()) throw ShapeError("mu and logvar sizes differ");
  return 0.5 * (mu.array().square() + logvar.array().exp() - 1.0 - logvar.array()).sum();
}

bool PlausibleSet::add(const Hierarchy& h) {
  const std::string key = topology_key(h);
  for (const auto& e : hierarchies) {
    if (topology_key(e) == key) return false;
  }
  hierarchies.push_back(h);
  return true;
}

std::vector<ScoredHierarchy> select_topk_hierarchies(const GanModel& gan, const Vector& z, const PlausibleSet& set,
                                                     int k, std::span<const int> subset) {
  if (k < 1) throw std::invalid_argument("k must be positive");
  if (z.size() != gan.n()) throw ShapeError("latent code has the wrong size");
  const auto candidates = unique_candidates(set, subset);
  if (candidates.empty()) return {};
  if (int(candidates.size()) < k) {
    std::cerr << "warning: plausible set has " << candidates.size() << " topologies, fewer than k = " << k << "\n";
  }
  return score_batch(gan, row(z), set, candidates, k, 1)[0];
}

Var decoded_logits(Graph& g, const GanModel& gan, Var roots,
                   const std::vector<std::vector<const Hierarchy*>>& per_root) {
  return fake_pass(g, gan, roots, per_root).logits;
}

GanDataset make_gan_dataset(const RvnnModel& model, const std::vector<PartGraph>& shapes, int per_shape,
                            std::uint64_t seed) {
  GanDataset d;
  Rng rng(seed);
  std::set<std::string> keys;
  auto add = [&](const Hierarchy& h) {
    if (keys.insert(topology_key(h)).second) d.library.hierarchies.push_back(h);
  };
  for (const auto& g : shapes) {
    d.real.push_back(infer_hierarchy(g, model));
    add(d.real.back());
    for (const auto& h : training_hierarchies(g, per_shape, rng)) add(h);
  }
  return d;
}

Json GanTrainLog::to_json() const {
  Json out = Json::array();
  for (const auto& e : epochs) {
    out.push_back({{"epoch", e.epoch},
                   {"jd", e.jd},
                   {"jg", e.jg},
                   {"recon", e.recon},
                   {"kl", e.kl},
                   {"d_real", e.d_real},
                   {"d_fake", e.d_fake}});
  }
  return out;
}

GanTrainLog train_vaegan(GanModel& gan, const GanDataset& data, const std::function<void(const GanEpochLog&)>& on_epoch) {
  const GanConfig& cfg = gan.config();
  cfg.validate();
  if (data.real.empty()) throw std::invalid_argument("no real hierarchies");
  if (data.library.size() == 0) throw std::invalid_argument("empty plausible set");
  ParameterStore& store = gan.rvnn().store();
  const int n = gan.n();

  std::vector<std::string> geo = with_params({"box_dec", "adj_dec.1", "adj_dec.2", "sym_dec.1", "sym_dec.2", "fl.1",
                                              "fl.2", "fmu", "fsigma"});
  std::vector<std::string> disc = with_params({"disc.1", "disc.2"});
  for (const auto& e : with_params(kEncoderLayers)) {
    disc.push_back(e);
    if (cfg.tune_encoder) geo.push_back(e);
  }
  OptimizerConfig dopt, gopt;
  dopt.learning_rate = cfg.d_learning_rate;
  gopt.learning_rate = cfg.g_learning_rate;
  ParamGroup d_group(store, disc, dopt), g_group(store, geo, gopt),
      c_group(store, with_params({"cls.1", "cls.2"}), gopt);

  // Codes from the encoder as trained before adversarial tuning.
  Matrix frozen(static_cast<Eigen::Index>(data.real.size()), n);
  for (std::size_t i = 0; i < data.real.size(); ++i) frozen.row(i) = encode_root(gan.rvnn(), data.real[i]).transpose();

  // Real leaf boxes in network space, in decode order per tree.
  Rng rng(cfg.seed);
  std::vector<int> order(data.real.size());
  std::iota(order.begin(), order.end(), 0);
  GanTrainLog log;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const ParameterStore snapshot = store;
    std::shuffle(order.begin(), order.end(), rng);
    GanEpochLog acc;
    acc.epoch = epoch;
    int batches = 0;
    try {
      for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const std::size_t end = std::min(order.size(), start + std::size_t(cfg.batch_size));
        const int B = int(end - start);
        std::vector<const Hierarchy*> real;
        for (std::size_t i = start; i < end; ++i) real.push_back(&data.real[order[i]]);

        // Library subset and top-k selection for fresh prior samples.
        std::vector<int> lib(data.library.size());
        std::iota(lib.begin(), lib.end(), 0);
        const int m = std::min<int>(cfg.library_sample, int(lib.size()));
        for (int i = 0; i < m; ++i) std::swap(lib[i], lib[i + rng() % (lib.size() - i)]);
        lib.resize(m);
        std::sort(lib.begin(), lib.end());
        const Matrix zp = normal_matrix(B, n, rng);
        const Matrix eps = normal_matrix(B, n, rng);
        const auto selected = score_batch(gan, zp, data.library, lib, cfg.top_k, cfg.threads);
        std::vector<std::vector<const Hierarchy*>> per_root(B);
        for (int b = 0; b < B; ++b) {
          for (const auto& s : selected[b]) per_root[b].push_back(&data.library.hierarchies[s.index]);
        }

        // Discriminator.
        for (int step = 0; step < cfg.d_steps; ++step) {
          Graph g(&store);
          const BatchEncoding enc = encode_batch(g, gan.rvnn(), real);
          std::vector<RowRef> roots;
          for (std::size_t t = 0; t < real.size(); ++t) roots.push_back(enc.codes[t][real[t]->root()]);
          const Var lr = gan.discriminator_logits(g, g.gather_rows(roots));
          const FakePass f = fake_pass(g, gan, gan.project(g, g.constant(zp)), per_root);
          const int nf = int(f.trees.size());
          const Var jd = g.add(
              g.softmax_cross_entropy(lr, std::vector<int>(B, 1), std::vector<double>(B, 0.5 / B)),
              g.softmax_cross_entropy(f.logits, std::vector<int>(nf, 0), std::vector<double>(nf, 0.5 / nf)));
          const double v = g.forward(jd)(0, 0);
          if (!std::isfinite(v)) throw NonFiniteError("discriminator loss");
          if (step == 0) {
            const auto pr = real_probability(g.value(lr)), pf = real_probability(g.value(f.logits));
            acc.jd += v;
            acc.d_real += std::accumulate(pr.begin(), pr.end(), 0.0) / B;
            acc.d_fake += std::accumulate(pf.begin(), pf.end(), 0.0) / nf;
          }
          d_group.step(store, g.backward(jd));
        }

        // Geometric decoders, f_l, f_mu, f_sigma.
        {
          Graph g(&store);
          const FakePass f = fake_pass(g, gan, gan.project(g, g.constant(zp)), per_root);
          const int nf = int(f.trees.size());
          const Var jg = g.softmax_cross_entropy(f.logits, std::vector<int>(nf, 1), std::vector<double>(nf, 0.5 / nf));

          Var encoded;
          if (cfg.tune_encoder) {
            const BatchEncoding enc = encode_batch(g, gan.rvnn(), real);
            std::vector<RowRef> roots;
            for (std::size_t t = 0; t < real.size(); ++t) roots.push_back(enc.codes[t][real[t]->root()]);
            encoded = g.gather_rows(roots);
          } else {
            Matrix e(B, n);
            for (int b = 0; b < B; ++b) e.row(b) = frozen.row(order[start + b]);
            encoded = g.constant(e);
          }
          const Var mu = gan.latent_mean(g, encoded), logvar = gan.latent_logvar(g, encoded);
          const Var zs = g.add(mu, g.mul(g.exp(g.affine(logvar, 0.5)), g.constant(eps)));
          const Var roots = gan.project(g, zs);
          std::vector<DecodeJob> jobs;
          for (int b = 0; b < B; ++b) jobs.push_back({b, real[b]->root(), {roots, b}});
          const BatchDecoding dec = decode_batch(g, gan.rvnn(), real, jobs);
          std::vector<RowRef> pred;
          Matrix target(static_cast<Eigen::Index>(dec.boxes.size()), kBoxVectorSize);
          for (std::size_t i = 0; i < dec.boxes.size(); ++i) {
            pred.push_back(dec.boxes[i].value);
            target.row(i) = box_to_net((*real[dec.boxes[i].tree])[dec.boxes[i].node].box).transpose();
          }
          // Shape-unit squared error: network space is half scale.
          const Var recon = g.affine(g.squared_error(g.gather_rows(pred), g.constant(target)), 4.0 / B);
          const Var kl = g.affine(
              g.sum(g.add(g.add(g.mul(mu, mu), g.exp(logvar)), g.affine(logvar, -1.0, -1.0))), 0.5 / B);
          const Var loss = g.add(jg, g.add(g.affine(recon, cfg.alpha1), g.affine(kl, cfg.alpha2)));
          const double v = g.forward(loss)(0, 0);
          if (!std::isfinite(v)) throw NonFiniteError("generator loss");
          acc.jg += g.value(jg)(0, 0);
          acc.recon += g.value(recon)(0, 0);
          acc.kl += g.value(kl)(0, 0);
          g_group.step(store, g.backward(loss));
        }

        // Node classifier, weighted by the updated D(G(z)).
        {
          Graph g(&store);
          const FakePass f = fake_pass(g, gan, gan.project(g, g.constant(zp)), per_root);
          const auto p = real_probability(g.forward(f.logits));
          std::vector<RowRef> codes;
          std::vector<int> labels;
          std::vector<double> weights;
          for (const auto& c : f.dec.codes) {
            codes.push_back(c.value);
            labels.push_back(node_class((*f.trees[c.tree])[c.node].type));
            weights.push_back(p[c.tree] / double(f.trees.size()));
          }
          const Var ce = g.softmax_cross_entropy(gan.rvnn().classifier_logits(g, g.gather_rows(codes)), labels, weights);
          if (!std::isfinite(g.forward(ce)(0, 0))) throw NonFiniteError("classifier loss");
          c_group.step(store, g.backward(ce));
        }
        ++batches;
      }
    } catch (const NonFiniteError& e) {
      store = snapshot;
      if (cfg.recovery_checkpoint) save_gan(*cfg.recovery_checkpoint, gan);
      throw DivergenceError(epoch, e.what());
    }
    for (double* v : {&acc.jd, &acc.jg, &acc.recon, &acc.kl, &acc.d_real, &acc.d_fake}) *v /= std::max(1, batches);
    log.epochs.push_back(acc);
    if (on_epoch) on_epoch(acc);
  }
  return log;
}

Json ValidityReport::to_json() const {
  return {{"valid", valid()},
          {"terminated", terminated},
          {"boxes_valid", boxes_valid},
          {"folds_in_range", folds_in_range},
          {"within_bounds", within_bounds},
          {"error", error}};
}

ValidityReport check_validity(const Hierarchy& h) {
  ValidityReport r;
  r.terminated = !h.empty();
  r.boxes_valid = r.folds_in_range = true;
  for (const auto& node : h.nodes) {
    if (node.type == NodeType::leaf && !is_valid(node.box)) r.boxes_valid = false;
    if (node.type == NodeType::symmetry) {
      const bool ok = node.sym.kind == SymmetryKind::reflective ? node.sym.fold == 2
                                                                : node.sym.fold >= kMinFold && node.sym.fold <= kMaxFold;
      if (!ok || !is_valid(node.sym)) r.folds_in_range = false;
    }
  }
  r.within_bounds = true;
  if (!h.empty()) {
    for (const auto& b : expand_boxes(h)) {
      if (!is_valid(b)) r.boxes_valid = false;
      for (const auto& c : obb_corners(b)) {
        if (!(c.norm() <= kBoundRadius)) r.within_bounds = false;
      }
    }
  }
  if (!r.boxes_valid) r.error = "invalid box";
  else if (!r.folds_in_range) r.error = "symmetry fold out of range";
  else if (!r.within_bounds) r.error = "box outside the bounding sphere";
  return r;
}

GeneratedStructure decode_structure(const GanModel& gan, const Vector& root, const DecodeCaps& caps) {
  GeneratedStructure out;
  auto d = try_decode_free(gan.rvnn(), root, caps);
  if (!d.ok()) {
    out.report.error = d.error;
    return out;
  }
  out.report = check_validity(*d.hierarchy);
  out.hierarchy = std::move(d.hierarchy);
  return out;
}

GeneratedStructure generate_structure(const GanModel& gan, const Vector& z, const DecodeCaps& caps) {
  if (z.size() != gan.n()) throw ShapeError("latent code has the wrong size");
  return decode_structure(gan, gan.project(z), caps);
}

Vector sample_latent(int n, Rng& rng) { return normal_matrix(n, 1, rng).col(0); }

std::vector<GeneratedStructure> interpolate_structures(const GanModel& gan, const PartGraph& a, const PartGraph& b,
                                                       int steps) {
  if (steps < 1) throw std::invalid_argument("steps must be positive");
  const Vector ra = encode_root(gan.rvnn(), infer_hierarchy(a, gan.rvnn()));
  const Vector rb = encode_root(gan.rvnn(), infer_hierarchy(b, gan.rvnn()));
  std::vector<GeneratedStructure> out;
  for (int i = 0; i < steps; ++i) {
    const double t = steps == 1 ? 0.0 : double(i) / (steps - 1);
    out.push_back(decode_structure(gan, i == steps - 1 && steps > 1 ? rb : Vector((1.0 - t) * ra + t * rb)));
  }
  return out;
}

void save_gan(const std::filesystem::path& path, const GanModel& gan, bool include_optimizer_state) {
  save_checkpoint(path, kGanCheckpointKind, gan.rvnn().store(), include_optimizer_state,
                  {{"rvnn", gan.rvnn().config().to_json()}, {"gan", gan.config().to_json()}});
}

GanModel load_gan(const std::filesystem::path& path) {
  Checkpoint cp = load_checkpoint(path);
  const std::string p = path.string();
  if (cp.kind != kGanCheckpointKind) throw FormatError(p, "kind", "expected " + kGanCheckpointKind + ", got " + cp.kind);
  const RvnnConfig rc = RvnnConfig::from_json(require_field(cp.meta, "rvnn", p, "meta.rvnn"), p);
  const GanConfig gc = GanConfig::from_json(require_field(cp.meta, "gan", p, "meta.gan"), p);
  try {
    return GanModel(RvnnModel(rc, std::move(cp.store)), gc);
  } catch (const std::exception& e) {
    throw FormatError(p, "parameters", e.what());
  }
}

}  // namespace grass
