#pragma once

#include <Eigen/Dense>

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace grass {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dense row-major tensor of rank 1 or 2. A rank-1 tensor of length n is
// stored as a 1 x n matrix so every op can work on matrices.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  Tensor(std::vector<int> shape, std::span<const double> values);

  static Tensor from_matrix(Matrix m);
  static Tensor from_vector(const Vector& v);
  static Tensor scalar(double v);

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::size_t size() const { return static_cast<std::size_t>(data_.size()); }
  int rows() const { return static_cast<int>(data_.rows()); }
  int cols() const { return static_cast<int>(data_.cols()); }

  const Matrix& matrix() const { return data_; }
  Matrix& matrix() { return data_; }
  std::span<const double> values() const { return {data_.data(), size()}; }
  std::span<double> values() { return {data_.data(), size()}; }

  double item() const;
  bool all_finite() const { return data_.allFinite(); }
  std::string shape_string() const;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  std::vector<int> shape_;
  Matrix data_;
};

std::string shape_string(const std::vector<int>& shape);

}  // namespace grass
