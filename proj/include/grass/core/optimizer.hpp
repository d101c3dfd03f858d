#pragma once

#include "grass/core/parameter_store.hpp"

#include <deque>
#include <functional>
#include <string>

namespace grass {

class NonFiniteError : public std::runtime_error {
 public:
  explicit NonFiniteError(const std::string& param)
      : std::runtime_error("non-finite gradient in parameter " + param), param_(param) {}
  const std::string& parameter() const { return param_; }

 private:
  std::string param_;
};

enum class OptimizerKind { adam, lbfgs };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 5.0;
  int lbfgs_history = 10;
};

OptimizerKind optimizer_kind_from_string(const std::string& s);
std::string to_string(OptimizerKind k);

// Throws NonFiniteError naming the first parameter with a non-finite gradient.
void check_gradients_finite(const ParameterStore& store);

// One Adam update from the accumulated gradients (clipped to the configured
// global norm), then clears the gradient accumulators.
void adam_step(ParameterStore& store, const OptimizerConfig& config);

// Dispatches on config.kind for gradient-only optimizers.
void optimizer_step(ParameterStore& store, const OptimizerConfig& config);

// Limited-memory BFGS with a backtracking Armijo line search. The objective
// callback must zero the store's gradients, evaluate the loss at the current
// parameter values, accumulate gradients, and return the loss.
class Lbfgs {
 public:
  using Objective = std::function<double(ParameterStore&)>;

  explicit Lbfgs(OptimizerConfig config) : config_(config) {}

  // Performs one iteration and returns the new loss.
  double step(ParameterStore& store, const Objective& objective);
  void reset();

 private:
  Vector flat_params(const ParameterStore& store) const;
  Vector flat_grads(const ParameterStore& store) const;
  void set_params(ParameterStore& store, const Vector& x) const;

  OptimizerConfig config_;
  std::deque<Vector> s_hist_;
  std::deque<Vector> y_hist_;
  Vector last_x_;
  Vector last_g_;
  double last_f_ = 0.0;
  bool started_ = false;
};

}  // namespace grass
