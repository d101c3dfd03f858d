#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace grass {

// Oriented bounding box: center, edge lengths, and two orthonormal axes; the
// third axis is axis1 x axis2.
template <typename Scalar>
struct Obb {
  using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
  using Mat3 = Eigen::Matrix<Scalar, 3, 3>;

  Vec3 center = Vec3::Zero();
  Vec3 dims = Vec3::Ones();
  Vec3 axis1 = Vec3::UnitX();
  Vec3 axis2 = Vec3::UnitY();

  Vec3 axis3() const { return axis1.cross(axis2); }
  Vec3 axis(int i) const { return i == 0 ? axis1 : (i == 1 ? axis2 : axis3()); }
  // Columns are the box axes; maps box-local coordinates to world.
  Mat3 rotation() const {
    Mat3 r;
    r.col(0) = axis1;
    r.col(1) = axis2;
    r.col(2) = axis3();
    return r;
  }
  Scalar diagonal() const { return dims.norm(); }

  bool operator==(const Obb& o) const {
    return center == o.center && dims == o.dims && axis1 == o.axis1 && axis2 == o.axis2;
  }
};

using Obbd = Obb<double>;
using Vec3d = Eigen::Vector3d;
using ObbVector = Eigen::Matrix<double, 12, 1>;

inline constexpr double kMinDim = 1e-4;

template <typename Scalar>
bool is_valid(const Obb<Scalar>& b, Scalar tol = Scalar(1e-6)) {
  using std::abs;
  return abs(b.axis1.norm() - 1) <= tol && abs(b.axis2.norm() - 1) <= tol && abs(b.axis1.dot(b.axis2)) <= tol &&
         (b.dims.array() > 0).all() && b.center.allFinite();
}

template <typename Scalar>
Eigen::Matrix<Scalar, 12, 1> obb_to_vec(const Obb<Scalar>& b) {
  Eigen::Matrix<Scalar, 12, 1> v;
  v << b.center, b.dims, b.axis1, b.axis2;
  return v;
}

// Accepts any 12 reals: axes are Gram-Schmidt orthonormalized (with
// fallbacks for degenerate input) and dims clamped to at least kMinDim.
template <typename Scalar>
Obb<Scalar> vec_to_obb(const Eigen::Matrix<Scalar, 12, 1>& v) {
  using Vec3 = typename Obb<Scalar>::Vec3;
  Obb<Scalar> b;
  b.center = v.template segment<3>(0);
  b.dims = v.template segment<3>(3).cwiseMax(Scalar(kMinDim));
  Vec3 a1 = v.template segment<3>(6);
  Vec3 a2 = v.template segment<3>(9);
  const Scalar eps = Scalar(1e-12);
  if (a1.norm() < eps) a1 = a2.norm() < eps ? Vec3::UnitX() : a2.unitOrthogonal();
  a1.normalize();
  a2 -= a1.dot(a2) * a1;
  if (a2.norm() < eps) a2 = a1.unitOrthogonal();
  a2.normalize();
  b.axis1 = a1;
  b.axis2 = a2;
  return b;
}

template <typename Scalar>
std::array<typename Obb<Scalar>::Vec3, 8> obb_corners(const Obb<Scalar>& b) {
  std::array<typename Obb<Scalar>::Vec3, 8> out;
  const auto h = (b.dims / Scalar(2)).eval();
  const auto a3 = b.axis3();
  for (int i = 0; i < 8; ++i) {
    const Scalar sx = (i & 1) ? 1 : -1;
    const Scalar sy = (i & 2) ? 1 : -1;
    const Scalar sz = (i & 4) ? 1 : -1;
    out[i] = b.center + sx * h[0] * b.axis1 + sy * h[1] * b.axis2 + sz * h[2] * a3;
  }
  return out;
}

// Largest distance from a corner of a to the nearest corner of b, symmetrized.
// Zero iff the two boxes occupy the same region.
template <typename Scalar>
Scalar corner_set_distance(const Obb<Scalar>& a, const Obb<Scalar>& b) {
  const auto ca = obb_corners(a);
  const auto cb = obb_corners(b);
  auto directed = [](const auto& p, const auto& q) {
    Scalar worst = 0;
    for (const auto& x : p) {
      Scalar best = std::numeric_limits<Scalar>::max();
      for (const auto& y : q) best = std::min(best, (x - y).norm());
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(directed(ca, cb), directed(cb, ca));
}

template <typename Scalar>
typename Obb<Scalar>::Vec3 sorted_dims(const Obb<Scalar>& b) {
  auto d = b.dims;
  std::sort(d.data(), d.data() + 3);
  return d;
}

template <typename Scalar>
bool congruent(const Obb<Scalar>& a, const Obb<Scalar>& b, Scalar tol) {
  return (sorted_dims(a) - sorted_dims(b)).cwiseAbs().maxCoeff() <= tol;
}

// Separating-axis distance: the largest gap between the projections of the
// two boxes over the 15 candidate axes, or 0 when they overlap.
template <typename Scalar>
Scalar obb_separation(const Obb<Scalar>& a, const Obb<Scalar>& b) {
  using Vec3 = typename Obb<Scalar>::Vec3;
  std::array<Vec3, 15> axes;
  int n = 0;
  for (int i = 0; i < 3; ++i) axes[n++] = a.axis(i);
  for (int i = 0; i < 3; ++i) axes[n++] = b.axis(i);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) axes[n++] = a.axis(i).cross(b.axis(j));
  }
  const Vec3 d = b.center - a.center;
  Scalar gap = 0;
  for (const Vec3& raw : axes) {
    const Scalar len = raw.norm();
    if (len < Scalar(1e-9)) continue;
    const Vec3 ax = raw / len;
    Scalar ra = 0, rb = 0;
    for (int i = 0; i < 3; ++i) {
      using std::abs;
      ra += a.dims[i] / 2 * abs(a.axis(i).dot(ax));
      rb += b.dims[i] / 2 * abs(b.axis(i).dot(ax));
    }
    using std::abs;
    gap = std::max(gap, abs(d.dot(ax)) - ra - rb);
  }
  return gap;
}

template <typename Scalar>
bool adjacency_test(const Obb<Scalar>& a, const Obb<Scalar>& b, Scalar tol) {
  return obb_separation(a, b) <= tol;
}

// Axis-aligned box around the corners of all given boxes.
template <typename Scalar, typename Range>
Obb<Scalar> axis_aligned_hull(const Range& boxes) {
  using Vec3 = typename Obb<Scalar>::Vec3;
  Vec3 lo = Vec3::Constant(std::numeric_limits<Scalar>::max());
  Vec3 hi = Vec3::Constant(std::numeric_limits<Scalar>::lowest());
  for (const Obb<Scalar>& b : boxes) {
    for (const auto& c : obb_corners(b)) {
      lo = lo.cwiseMin(c);
      hi = hi.cwiseMax(c);
    }
  }
  Obb<Scalar> out;
  out.center = (lo + hi) / 2;
  out.dims = (hi - lo).cwiseMax(Scalar(kMinDim));
  return out;
}

// Lexicographic (x, y, z) order on centers.
template <typename Scalar>
bool lexicographic_less(const Eigen::Matrix<Scalar, 3, 1>& a, const Eigen::Matrix<Scalar, 3, 1>& b) {
  return std::lexicographical_compare(a.data(), a.data() + 3, b.data(), b.data() + 3);
}

// Applies an affine map whose linear part is orthogonal (rotation or
// reflection) to a box.
template <typename Scalar>
Obb<Scalar> transform_obb(const Obb<Scalar>& b, const Eigen::Transform<Scalar, 3, Eigen::Affine>& t) {
  Obb<Scalar> out = b;
  out.center = t * b.center;
  out.axis1 = t.linear() * b.axis1;
  out.axis2 = t.linear() * b.axis2;
  return out;
}

}  // namespace grass
