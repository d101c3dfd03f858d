#include "grass/core/optimizer.hpp"

#include <cmath>

namespace grass {

OptimizerKind optimizer_kind_from_string(const std::string& s) {
  if (s == "adam") return OptimizerKind::adam;
  if (s == "lbfgs") return OptimizerKind::lbfgs;
  throw std::invalid_argument("unknown optimizer: " + s);
}

std::string to_string(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "lbfgs"; }

void check_gradients_finite(const ParameterStore& store) {
  for (const auto& e : store.entries()) {
    if (!e.grad.allFinite()) throw NonFiniteError(e.name);
  }
}

void adam_step(ParameterStore& store, const OptimizerConfig& config) {
  check_gradients_finite(store);
  store.clip_grad_norm(config.clip_norm);
  ++store.step_count;
  const double t = static_cast<double>(store.step_count);
  const double bc1 = 1.0 - std::pow(config.beta1, t);
  const double bc2 = 1.0 - std::pow(config.beta2, t);
  for (auto& e : store.entries()) {
    Matrix& w = e.value.matrix();
    if (e.adam_m.size() == 0) {
      e.adam_m = Matrix::Zero(w.rows(), w.cols());
      e.adam_v = Matrix::Zero(w.rows(), w.cols());
    }
    e.adam_m = config.beta1 * e.adam_m + (1.0 - config.beta1) * e.grad;
    e.adam_v = config.beta2 * e.adam_v + (1.0 - config.beta2) * e.grad.cwiseAbs2();
    w.array() -= config.learning_rate * (e.adam_m.array() / bc1) /
                 ((e.adam_v.array() / bc2).sqrt() + config.epsilon);
  }
  store.zero_grad();
}

void optimizer_step(ParameterStore& store, const OptimizerConfig& config) {
  if (config.kind != OptimizerKind::adam) {
    throw std::invalid_argument("optimizer_step needs a gradient-only optimizer; use Lbfgs for lbfgs");
  }
  adam_step(store, config);
}

Vector Lbfgs::flat_params(const ParameterStore& store) const {
  Vector x(static_cast<Eigen::Index>(store.parameter_count()));
  Eigen::Index o = 0;
  for (const auto& e : store.entries()) {
    const auto vals = e.value.values();
    x.segment(o, static_cast<Eigen::Index>(vals.size())) =
        Eigen::Map<const Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
    o += static_cast<Eigen::Index>(vals.size());
  }
  return x;
}

Vector Lbfgs::flat_grads(const ParameterStore& store) const {
  Vector g(static_cast<Eigen::Index>(store.parameter_count()));
  Eigen::Index o = 0;
  for (const auto& e : store.entries()) {
    g.segment(o, e.grad.size()) = Eigen::Map<const Vector>(e.grad.data(), e.grad.size());
    o += e.grad.size();
  }
  return g;
}

void Lbfgs::set_params(ParameterStore& store, const Vector& x) const {
  Eigen::Index o = 0;
  for (auto& e : store.entries()) {
    auto vals = e.value.values();
    Eigen::Map<Vector>(vals.data(), static_cast<Eigen::Index>(vals.size())) =
        x.segment(o, static_cast<Eigen::Index>(vals.size()));
    o += static_cast<Eigen::Index>(vals.size());
  }
}

void Lbfgs::reset() {
  s_hist_.clear();
  y_hist_.clear();
  started_ = false;
}

double Lbfgs::step(ParameterStore& store, const Objective& objective) {
  if (!started_) {
    last_f_ = objective(store);
    check_gradients_finite(store);
    last_x_ = flat_params(store);
    last_g_ = flat_grads(store);
    started_ = true;
  }

  // Two-loop recursion for the search direction.
  Vector q = last_g_;
  const std::size_t m = s_hist_.size();
  std::vector<double> alpha(m), rho(m);
  for (std::size_t i = m; i-- > 0;) {
    rho[i] = 1.0 / y_hist_[i].dot(s_hist_[i]);
    alpha[i] = rho[i] * s_hist_[i].dot(q);
    q -= alpha[i] * y_hist_[i];
  }
  if (m > 0) {
    q *= s_hist_.back().dot(y_hist_.back()) / y_hist_.back().squaredNorm();
  } else {
    q *= config_.learning_rate / std::max(1.0, last_g_.norm());
  }
  for (std::size_t i = 0; i < m; ++i) {
    const double beta = rho[i] * y_hist_[i].dot(q);
    q += s_hist_[i] * (alpha[i] - beta);
  }
  Vector dir = -q;
  double slope = last_g_.dot(dir);
  if (!(slope < 0.0)) {
    reset();
    started_ = true;
    dir = -last_g_ * (config_.learning_rate / std::max(1.0, last_g_.norm()));
    slope = last_g_.dot(dir);
  }

  double t = 1.0;
  double f = 0.0;
  Vector x;
  for (int tries = 0; tries < 30; ++tries) {
    x = last_x_ + t * dir;
    set_params(store, x);
    f = objective(store);
    if (std::isfinite(f) && f <= last_f_ + 1e-4 * t * slope) break;
    t *= 0.5;
  }
  if (!std::isfinite(f) || f > last_f_) {
    // Line search failed; keep the previous iterate.
    set_params(store, last_x_);
    f = objective(store);
    reset();
    store.zero_grad();
    return f;
  }
  check_gradients_finite(store);
  Vector g = flat_grads(store);
  Vector s = x - last_x_;
  Vector y = g - last_g_;
  if (s.dot(y) > 1e-12) {
    s_hist_.push_back(std::move(s));
    y_hist_.push_back(std::move(y));
    if (static_cast<int>(s_hist_.size()) > config_.lbfgs_history) {
      s_hist_.pop_front();
      y_hist_.pop_front();
    }
  }
  last_x_ = std::move(x);
  last_g_ = std::move(g);
  last_f_ = f;
  ++store.step_count;
  store.zero_grad();
  return f;
}

}  // namespace grass
