#include "grass/rvnn/train.hpp"

#include "grass/shape/json.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <thread>

namespace grass {

Json TrainConfig::to_json() const {
  Json j{{"epochs", epochs},
         {"batch_size", batch_size},
         {"learning_rate", learning_rate},
         {"lambda", lambda},
         {"subtree_loss", subtree_loss},
         {"symmetry_loss", symmetry_loss},
         {"seed", seed},
         {"optimizer", to_string(optimizer)},
         {"threads", threads}};
  if (final_learning_rate) j["final_learning_rate"] = *final_learning_rate;
  return j;
}

TrainConfig TrainConfig::from_json(const Json& j, const std::string& path) {
  TrainConfig c;
  try {
    if (j.contains("epochs")) c.epochs = j.at("epochs").get<int>();
    if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<int>();
    if (j.contains("learning_rate")) c.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("final_learning_rate")) c.final_learning_rate = j.at("final_learning_rate").get<double>();
    if (j.contains("lambda")) c.lambda = j.at("lambda").get<double>();
    if (j.contains("subtree_loss")) c.subtree_loss = j.at("subtree_loss").get<bool>();
    if (j.contains("symmetry_loss")) c.symmetry_loss = j.at("symmetry_loss").get<bool>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("optimizer")) c.optimizer = optimizer_kind_from_string(j.at("optimizer").get<std::string>());
    if (j.contains("threads")) c.threads = j.at("threads").get<int>();
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

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("epochs must be non-negative");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be positive");
  if (!(learning_rate > 0)) throw std::invalid_argument("learning_rate must be positive");
  if (final_learning_rate && !(*final_learning_rate > 0 && *final_learning_rate <= learning_rate))
    throw std::invalid_argument("final_learning_rate must lie in (0, learning_rate]");
  if (!(lambda > 0 && lambda <= 1)) throw std::invalid_argument("lambda must lie in (0, 1]");
  if (threads < 1) throw std::invalid_argument("threads must be positive");
}

Json TrainLog::to_json() const {
  Json out = Json::array();
  for (const auto& e : epochs) {
    out.push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"box", e.box}, {"symmetry", e.symmetry}, {"classifier", e.classifier}});
  }
  return out;
}

namespace {

struct ShardResult {
  EpochLog terms;
  GradientMap grads;
};

// Loss sum (not mean) over trees[begin, end) and its gradients.
ShardResult run_shard(const RvnnModel& model, const std::vector<const Hierarchy*>& trees, const LossOptions& options,
                      bool with_grad) {
  Graph g(&model.store());
  const LossTerms t = reconstruction_loss(g, model, trees, options);
  ShardResult r;
  const double k = static_cast<double>(trees.size());
  r.terms.loss = g.forward(t.total)(0, 0) * k;
  r.terms.box = g.forward(t.box)(0, 0) * k;
  r.terms.symmetry = g.forward(t.symmetry)(0, 0) * k;
  r.terms.classifier = g.forward(t.classifier)(0, 0) * k;
  if (with_grad) {
    r.grads = g.backward(t.total);
    for (auto& [name, m] : r.grads) m *= k;
  }
  return r;
}

// Splits a batch into `threads` contiguous shards and sums their results in
// shard order, so the outcome depends only on the thread count.
ShardResult run_batch(const RvnnModel& model, const std::vector<const Hierarchy*>& batch, const LossOptions& options,
                      bool with_grad, int threads) {
  const int shards = std::max(1, std::min<int>(threads, static_cast<int>(batch.size())));
  std::vector<ShardResult> results(static_cast<std::size_t>(shards));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(shards));
  auto work = [&](int s) {
    const std::size_t lo = batch.size() * s / shards, hi = batch.size() * (s + 1) / shards;
    try {
      results[s] = run_shard(model, {batch.begin() + lo, batch.begin() + hi}, options, with_grad);
    } catch (...) {
      errors[s] = std::current_exception();
    }
  };
  if (shards == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int s = 0; s < shards; ++s) pool.emplace_back(work, s);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  ShardResult total = std::move(results[0]);
  for (int s = 1; s < shards; ++s) {
    total.terms.loss += results[s].terms.loss;
    total.terms.box += results[s].terms.box;
    total.terms.symmetry += results[s].terms.symmetry;
    total.terms.classifier += results[s].terms.classifier;
    for (auto& [name, m] : results[s].grads) {
      auto it = total.grads.find(name);
      if (it == total.grads.end()) {
        total.grads.emplace(name, std::move(m));
      } else {
        it->second += m;
      }
    }
  }
  return total;
}

void scale(EpochLog& e, double s) {
  e.loss *= s;
  e.box *= s;
  e.symmetry *= s;
  e.classifier *= s;
}

}  // namespace

EpochLog evaluate_loss(const RvnnModel& model, const std::vector<Hierarchy>& trees, const LossOptions& options,
                       int chunk) {
  EpochLog sum;
  for (std::size_t i = 0; i < trees.size(); i += static_cast<std::size_t>(chunk)) {
    std::vector<const Hierarchy*> batch;
    for (std::size_t k = i; k < std::min(trees.size(), i + chunk); ++k) batch.push_back(&trees[k]);
    const auto r = run_shard(model, batch, options, false);
    sum.loss += r.terms.loss;
    sum.box += r.terms.box;
    sum.symmetry += r.terms.symmetry;
    sum.classifier += r.terms.classifier;
  }
  scale(sum, 1.0 / static_cast<double>(trees.size()));
  return sum;
}

double epoch_learning_rate(const TrainConfig& config, int epoch) {
  if (!config.final_learning_rate || config.epochs <= 1) return config.learning_rate;
  const double t = static_cast<double>(std::clamp(epoch, 1, config.epochs) - 1) / (config.epochs - 1);
  const double lo = *config.final_learning_rate;
  return lo + 0.5 * (config.learning_rate - lo) * (1.0 + std::cos(std::numbers::pi * t));
}

TrainLog train_autoencoder(RvnnModel& model, const std::vector<Hierarchy>& trees, const TrainConfig& config,
                           const std::function<void(const EpochLog&)>& on_epoch) {
  config.validate();
  if (trees.empty()) throw std::invalid_argument("training set is empty");
  const LossOptions options{config.lambda, config.subtree_loss, config.symmetry_loss};
  OptimizerConfig opt;
  opt.kind = config.optimizer;
  opt.learning_rate = config.learning_rate;
  Lbfgs lbfgs(opt);
  Rng rng(config.seed);

  TrainLog log;
  log.epochs.push_back(evaluate_loss(model, trees, options));
  if (on_epoch) on_epoch(log.epochs.back());

  std::vector<std::size_t> order(trees.size());
  std::iota(order.begin(), order.end(), 0);
  auto finite = [](const EpochLog& e) { return std::isfinite(e.loss); };

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const ParameterStore last_good = model.store();
    auto diverge = [&](const std::string& what) {
      model.store() = last_good;
      if (config.recovery_checkpoint) save_rvnn(*config.recovery_checkpoint, model);
      throw DivergenceError(epoch, what);
    };
    opt.learning_rate = epoch_learning_rate(config, epoch);
    EpochLog sum;
    sum.epoch = epoch;
    try {
      if (config.optimizer == OptimizerKind::lbfgs) {
        std::vector<const Hierarchy*> all;
        for (const auto& t : trees) all.push_back(&t);
        const double n = static_cast<double>(all.size());
        EpochLog last;
        lbfgs.step(model.store(), [&](ParameterStore& store) {
          store.zero_grad();
          const auto r = run_batch(model, all, options, true, config.threads);
          store.accumulate(r.grads, 1.0 / n);
          last = r.terms;
          scale(last, 1.0 / n);
          return last.loss;
        });
        sum.loss = last.loss;
        sum.box = last.box;
        sum.symmetry = last.symmetry;
        sum.classifier = last.classifier;
      } else {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
        for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(config.batch_size)) {
          std::vector<const Hierarchy*> batch;
          for (std::size_t k = b; k < std::min(order.size(), b + config.batch_size); ++k) batch.push_back(&trees[order[k]]);
          const auto r = run_batch(model, batch, options, true, config.threads);
          if (!finite(r.terms)) diverge("non-finite loss");
          model.store().zero_grad();
          model.store().accumulate(r.grads, 1.0 / static_cast<double>(batch.size()));
          adam_step(model.store(), opt);
          sum.loss += r.terms.loss;
          sum.box += r.terms.box;
          sum.symmetry += r.terms.symmetry;
          sum.classifier += r.terms.classifier;
        }
        scale(sum, 1.0 / static_cast<double>(trees.size()));
      }
    } catch (const NonFiniteError& e) {
      diverge(e.what());
    }
    if (!finite(sum)) diverge("non-finite loss");
    log.epochs.push_back(sum);
    if (on_epoch) on_epoch(sum);
  }
  return log;
}

}  // namespace grass
