#include "grass/core/parameter_store.hpp"

#include <cmath>

namespace grass {

Tensor& ParameterStore::add(const std::string& name, Tensor value) {
  if (contains(name)) {
    throw std::invalid_argument("duplicate parameter name: " + name);
  }
  Entry e;
  e.name = name;
  e.grad = Matrix::Zero(value.rows(), value.cols());
  e.value = std::move(value);
  index_[name] = entries_.size();
  entries_.push_back(std::move(e));
  return entries_.back().value;
}

Tensor& ParameterStore::add_gaussian(const std::string& name, std::vector<int> shape, Rng& rng,
                                     double stddev) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : t.values()) v = dist(rng);
  return add(name, std::move(t));
}

Tensor& ParameterStore::add_zeros(const std::string& name, std::vector<int> shape) {
  return add(name, Tensor(std::move(shape)));
}

ParameterStore::Entry& ParameterStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
  return entries_[it->second];
}

const ParameterStore::Entry& ParameterStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
  return entries_[it->second];
}

std::vector<std::string> ParameterStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.name);
  return out;
}

std::size_t ParameterStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& e : entries_) e.grad.setZero();
}

void ParameterStore::accumulate(const GradientMap& grads, double scale) {
  for (const auto& [name, g] : grads) {
    auto& e = at(name);
    if (g.rows() != e.grad.rows() || g.cols() != e.grad.cols()) {
      throw ShapeError("gradient shape mismatch for parameter " + name);
    }
    e.grad += scale * g;
  }
}

double ParameterStore::grad_norm() const {
  double sq = 0.0;
  for (const auto& e : entries_) sq += e.grad.squaredNorm();
  return std::sqrt(sq);
}

double ParameterStore::clip_grad_norm(double max_norm) {
  const double norm = grad_norm();
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& e : entries_) e.grad *= s;
  }
  return norm;
}

}  // namespace grass
