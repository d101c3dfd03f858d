#pragma once

#include "grass/data/shape_record.hpp"
#include "grass/shape/obb.hpp"

#include <vector>

namespace grass {

// R^3 occupancy values in [0, 1], x fastest: index = x + R * (y + R * z).
// In a part grid, axis1 maps to x, axis2 to y and axis3 to z.
struct VoxelGrid {
  int resolution = 0;
  std::vector<float> values;

  VoxelGrid() = default;
  explicit VoxelGrid(int r) : resolution(r), values(static_cast<std::size_t>(r) * r * r, 0.0f) {}

  std::size_t size() const { return values.size(); }
  std::size_t index(int x, int y, int z) const {
    return static_cast<std::size_t>(x) + static_cast<std::size_t>(resolution) * (y + static_cast<std::size_t>(resolution) * z);
  }
  float& at(int x, int y, int z) { return values[index(x, y, z)]; }
  float at(int x, int y, int z) const { return values[index(x, y, z)]; }
  std::size_t occupied(float threshold = 0.5f) const;
  VoxelGrid binarized(float threshold = 0.5f) const;

  bool operator==(const VoxelGrid&) const = default;
};

// Box-local coordinate in [-0.5, 0.5] of cell center i; the box spans the
// grid up to a one-voxel margin on each side.
double part_cell_coordinate(int i, int resolution);

VoxelGrid voxelize_part(const Obbd& box, int resolution, PartStyle style);

// Cells set in `v` with all six neighbours set.
VoxelGrid erode(const VoxelGrid& v);

double iou(const VoxelGrid& a, const VoxelGrid& b, float threshold = 0.5f);

}  // namespace grass
