#pragma once

#include "grass/core/tensor.hpp"

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace grass {

using Rng = std::mt19937_64;

// Gradients keyed by parameter name; produced by Graph::backward.
using GradientMap = std::map<std::string, Matrix>;

class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    Matrix grad;
    // Adam moments; empty until the first optimizer step.
    Matrix adam_m;
    Matrix adam_v;
  };

  Tensor& add(const std::string& name, Tensor value);
  // Zero-mean Gaussian weights (default std 0.05).
  Tensor& add_gaussian(const std::string& name, std::vector<int> shape, Rng& rng, double stddev = 0.05);
  Tensor& add_zeros(const std::string& name, std::vector<int> shape);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Tensor& value(const std::string& name) { return at(name).value; }
  const Tensor& value(const std::string& name) const { return at(name).value; }
  Matrix& grad(const std::string& name) { return at(name).grad; }
  const Matrix& grad(const std::string& name) const { return at(name).grad; }

  Entry& at(const std::string& name);
  const Entry& at(const std::string& name) const;

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<std::string> names() const;
  std::size_t parameter_count() const;

  void zero_grad();
  void accumulate(const GradientMap& grads, double scale = 1.0);
  double grad_norm() const;
  // Rescales all gradients so their global norm is at most max_norm.
  // Returns the norm before clipping.
  double clip_grad_norm(double max_norm);

  std::int64_t step_count = 0;

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace grass
