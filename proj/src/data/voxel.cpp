#include "grass/data/voxel.hpp"

#include <algorithm>
#include <cmath>

namespace grass {

std::size_t VoxelGrid::occupied(float threshold) const {
  return static_cast<std::size_t>(
      std::count_if(values.begin(), values.end(), [threshold](float v) { return v >= threshold; }));
}

VoxelGrid VoxelGrid::binarized(float threshold) const {
  VoxelGrid out = *this;
  for (float& v : out.values) v = v >= threshold ? 1.0f : 0.0f;
  return out;
}

double part_cell_coordinate(int i, int resolution) { return ((i + 0.5) - 1.0) / (resolution - 2) - 0.5; }

namespace {

bool inside(const Vec3d& s, PartStyle style, int long_axis) {
  if ((s.array().abs() > 0.5).any()) return false;
  const Vec3d u = s * 2.0;
  switch (style) {
    case PartStyle::solid:
    case PartStyle::shell:
      return true;
    case PartStyle::ellipsoid:
      return u.squaredNorm() <= 1.0;
    case PartStyle::cylinder: {
      double r2 = 0.0;
      for (int a = 0; a < 3; ++a) {
        if (a != long_axis) r2 += u[a] * u[a];
      }
      return r2 <= 1.0;
    }
  }
  return false;
}

}  // namespace

VoxelGrid voxelize_part(const Obbd& box, int resolution, PartStyle style) {
  if (resolution < 3) throw std::invalid_argument("voxel resolution must be at least 3");
  VoxelGrid v(resolution);
  if (box.dims.minCoeff() <= kMinDim) return v;
  int long_axis = 0;
  box.dims.maxCoeff(&long_axis);
  for (int z = 0; z < resolution; ++z) {
    for (int y = 0; y < resolution; ++y) {
      for (int x = 0; x < resolution; ++x) {
        const Vec3d s(part_cell_coordinate(x, resolution), part_cell_coordinate(y, resolution),
                      part_cell_coordinate(z, resolution));
        if (inside(s, style, long_axis)) v.at(x, y, z) = 1.0f;
      }
    }
  }
  if (style == PartStyle::shell) {
    const VoxelGrid inner = erode(v);
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (inner.values[i] > 0.5f) v.values[i] = 0.0f;
    }
  }
  return v;
}

VoxelGrid erode(const VoxelGrid& v) {
  const int r = v.resolution;
  VoxelGrid out(r);
  auto set = [&](int x, int y, int z) {
    return x >= 0 && y >= 0 && z >= 0 && x < r && y < r && z < r && v.at(x, y, z) >= 0.5f;
  };
  for (int z = 0; z < r; ++z) {
    for (int y = 0; y < r; ++y) {
      for (int x = 0; x < r; ++x) {
        if (set(x, y, z) && set(x - 1, y, z) && set(x + 1, y, z) && set(x, y - 1, z) && set(x, y + 1, z) &&
            set(x, y, z - 1) && set(x, y, z + 1)) {
          out.at(x, y, z) = 1.0f;
        }
      }
    }
  }
  return out;
}

double iou(const VoxelGrid& a, const VoxelGrid& b, float threshold) {
  if (a.size() != b.size()) throw std::invalid_argument("iou of grids with different resolutions");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a.values[i] >= threshold, y = b.values[i] >= threshold;
    inter += x && y;
    uni += x || y;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace grass
