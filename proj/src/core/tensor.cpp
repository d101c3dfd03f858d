#include "grass/core/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace grass {

namespace {

void check_shape(const std::vector<int>& shape) {
  if (shape.empty() || shape.size() > 2) {
    throw ShapeError("tensor rank must be 1 or 2, got " + grass::shape_string(shape));
  }
  if (std::any_of(shape.begin(), shape.end(), [](int d) { return d <= 0; })) {
    throw ShapeError("tensor dimensions must be positive, got " + grass::shape_string(shape));
  }
}

}  // namespace

std::string shape_string(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    os << (i ? "," : "") << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_ = Matrix::Zero(shape_.size() == 1 ? 1 : shape_[0], shape_.back());
}

Tensor::Tensor(std::vector<int> shape, std::span<const double> values) : Tensor(std::move(shape)) {
  if (values.size() != size()) {
    throw ShapeError("value count " + std::to_string(values.size()) + " does not match shape " +
                     grass::shape_string(shape_));
  }
  std::copy(values.begin(), values.end(), data_.data());
}

Tensor Tensor::from_matrix(Matrix m) {
  Tensor t;
  t.shape_ = {static_cast<int>(m.rows()), static_cast<int>(m.cols())};
  check_shape(t.shape_);
  t.data_ = std::move(m);
  return t;
}

Tensor Tensor::from_vector(const Vector& v) {
  Tensor t({static_cast<int>(v.size())});
  t.data_.row(0) = v.transpose();
  return t;
}

Tensor Tensor::scalar(double v) {
  Tensor t({1});
  t.data_(0, 0) = v;
  return t;
}

double Tensor::item() const {
  if (size() != 1) {
    throw ShapeError("item() on tensor of shape " + grass::shape_string(shape_));
  }
  return data_(0, 0);
}

std::string Tensor::shape_string() const { return grass::shape_string(shape_); }

}  // namespace grass
