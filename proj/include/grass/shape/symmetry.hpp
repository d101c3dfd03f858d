#pragma once

#include "grass/shape/obb.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace grass {

enum class SymmetryKind { reflective, rotational, translational };

std::string to_string(SymmetryKind k);
SymmetryKind symmetry_kind_from_string(const std::string& s);

inline constexpr int kMinFold = 2;
inline constexpr int kMaxFold = 16;
inline constexpr int kSymmetryVectorSize = 8;

// The 6 geometric reals are (point, direction):
//   reflective    plane point, unit plane normal
//   rotational    axis point, unit axis direction
//   translational start position, per-step displacement
template <typename Scalar>
struct SymmetrySpec {
  using Vec3 = Eigen::Matrix<Scalar, 3, 1>;

  SymmetryKind kind = SymmetryKind::reflective;
  int fold = 2;
  Vec3 point = Vec3::Zero();
  Vec3 direction = Vec3::UnitX();

  bool operator==(const SymmetrySpec& o) const {
    return kind == o.kind && fold == o.fold && point == o.point && direction == o.direction;
  }
};

using SymmetrySpecd = SymmetrySpec<double>;
using SymmetryVector = Eigen::Matrix<double, kSymmetryVectorSize, 1>;

template <typename Scalar>
bool is_valid(const SymmetrySpec<Scalar>& s, Scalar tol = Scalar(1e-6)) {
  using std::abs;
  if (s.fold < kMinFold) return false;
  if (s.kind == SymmetryKind::reflective && s.fold != 2) return false;
  if (s.kind != SymmetryKind::translational && abs(s.direction.norm() - 1) > tol) return false;
  return s.point.allFinite() && s.direction.allFinite();
}

// The map taking the generator to the j-th member of the group.
template <typename Scalar>
Eigen::Transform<Scalar, 3, Eigen::Affine> symmetry_transform(const SymmetrySpec<Scalar>& s, int j) {
  using Transform = Eigen::Transform<Scalar, 3, Eigen::Affine>;
  using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
  Transform t = Transform::Identity();
  switch (s.kind) {
    case SymmetryKind::reflective: {
      if (j % 2 == 0) break;
      const auto n = s.direction.normalized().eval();
      const Mat3 m = Mat3::Identity() - Scalar(2) * n * n.transpose();
      t.linear() = m;
      t.translation() = s.point - m * s.point;
      break;
    }
    case SymmetryKind::rotational: {
      const Scalar angle = Scalar(2) * std::numbers::pi_v<Scalar> * Scalar(j) / Scalar(s.fold);
      const Mat3 r = Eigen::AngleAxis<Scalar>(angle, s.direction.normalized()).toRotationMatrix();
      t.linear() = r;
      t.translation() = s.point - r * s.point;
      break;
    }
    case SymmetryKind::translational:
      t.translation() = Scalar(j) * s.direction;
      break;
  }
  return t;
}

// All fold members, generator first.
template <typename Scalar>
std::vector<Obb<Scalar>> apply_symmetry(const Obb<Scalar>& generator, const SymmetrySpec<Scalar>& s) {
  std::vector<Obb<Scalar>> out;
  out.reserve(static_cast<std::size_t>(s.fold));
  out.push_back(generator);
  for (int j = 1; j < s.fold; ++j) out.push_back(transform_obb(generator, symmetry_transform(s, j)));
  return out;
}

inline double symmetry_type_code(SymmetryKind k) {
  switch (k) {
    case SymmetryKind::reflective:
      return -1.0;
    case SymmetryKind::rotational:
      return 0.0;
    case SymmetryKind::translational:
      return 1.0;
  }
  return 0.0;
}

inline double normalize_fold(int k) { return (k - kMinFold) / double(kMaxFold - kMinFold); }

inline int denormalize_fold(double v) {
  const double k = std::round(v * (kMaxFold - kMinFold) + kMinFold);
  if (!std::isfinite(k)) return kMinFold;
  return static_cast<int>(std::clamp(k, double(kMinFold), double(kMaxFold)));
}

template <typename Scalar>
Eigen::Matrix<Scalar, kSymmetryVectorSize, 1> sym_to_vec(const SymmetrySpec<Scalar>& s) {
  Eigen::Matrix<Scalar, kSymmetryVectorSize, 1> v;
  v << Scalar(symmetry_type_code(s.kind)), Scalar(normalize_fold(s.fold)), s.point, s.direction;
  return v;
}

// Snaps the type code to the nearest kind, rounds and clamps the fold, and
// renormalizes normals and axis directions.
template <typename Scalar>
SymmetrySpec<Scalar> vec_to_sym(const Eigen::Matrix<Scalar, kSymmetryVectorSize, 1>& v) {
  SymmetrySpec<Scalar> s;
  const double code = static_cast<double>(v[0]);
  if (code < -0.5) {
    s.kind = SymmetryKind::reflective;
  } else if (code > 0.5) {
    s.kind = SymmetryKind::translational;
  } else {
    s.kind = SymmetryKind::rotational;
  }
  s.fold = s.kind == SymmetryKind::reflective ? 2 : denormalize_fold(static_cast<double>(v[1]));
  s.point = v.template segment<3>(2);
  s.direction = v.template segment<3>(5);
  if (s.kind != SymmetryKind::translational) {
    if (s.direction.norm() < Scalar(1e-12)) {
      s.direction = SymmetrySpec<Scalar>::Vec3::UnitY();
    } else {
      s.direction.normalize();
    }
  }
  return s;
}

// True when two specs describe the same group of transforms, up to the sign
// of a normal or axis and the direction of a translation.
template <typename Scalar>
bool equivalent(const SymmetrySpec<Scalar>& a, const SymmetrySpec<Scalar>& b, Scalar tol) {
  if (a.kind != b.kind || a.fold != b.fold) return false;
  switch (a.kind) {
    case SymmetryKind::reflective:
    case SymmetryKind::rotational: {
      const auto da = a.direction.normalized().eval();
      const auto db = b.direction.normalized().eval();
      if (da.cross(db).norm() > tol) return false;
      // b's point must lie on a's plane (reflective) or line (rotational).
      const auto d = (b.point - a.point).eval();
      if (a.kind == SymmetryKind::reflective) return std::abs(d.dot(da)) <= tol;
      return (d - d.dot(da) * da).norm() <= tol;
    }
    case SymmetryKind::translational:
      return (a.direction - b.direction).norm() <= tol || (a.direction + b.direction).norm() <= tol;
  }
  return false;
}

}  // namespace grass
