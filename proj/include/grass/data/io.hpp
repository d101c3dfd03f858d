#pragma once

#include "grass/core/checkpoint.hpp"
#include "grass/data/shape_record.hpp"
#include "grass/data/voxel.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace grass {

inline constexpr int kShapeSchemaVersion = 1;
inline constexpr int kManifestSchemaVersion = 1;
inline constexpr int kVoxelSchemaVersion = 1;

Json shape_to_json(const ShapeRecord& s);
// Relations are recomputed with detect_relations when the file has none.
ShapeRecord shape_from_json(const Json& j, const std::string& path = "<memory>");
void save_shape(const std::filesystem::path& path, const ShapeRecord& s);
ShapeRecord load_shape(const std::filesystem::path& path);

enum class Split { train, test };

struct ManifestEntry {
  // Relative to the manifest's directory.
  std::string path;
  std::string category;
  std::string subclass;
  Split split = Split::train;

  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::uint64_t seed = 0;
  std::vector<ManifestEntry> entries;

  std::map<std::string, int> category_counts() const;
  std::map<std::string, int> subclass_counts() const;
  std::vector<std::size_t> indices(Split s) const;

  bool operator==(const DatasetManifest&) const = default;
};

// Marks round(train_fraction * n) entries as train via a seeded
// permutation; the rest are test.
void assign_splits(DatasetManifest& m, double train_fraction, std::uint64_t seed);

void save_manifest(const std::filesystem::path& path, const DatasetManifest& m);
DatasetManifest load_manifest(const std::filesystem::path& path);

struct Dataset {
  DatasetManifest manifest;
  std::vector<ShapeRecord> shapes;

  std::vector<const ShapeRecord*> split(Split s) const;
};

// Writes shapes as <dir>/<id>.json plus <dir>/manifest.json.
Dataset write_dataset(const std::filesystem::path& dir, std::vector<ShapeRecord> shapes, double train_fraction,
                      std::uint64_t seed);
Dataset load_dataset(const std::filesystem::path& manifest_path);

// Binarized grids store one byte per cell, soft grids 32-bit floats.
Json voxel_to_json(const VoxelGrid& v, bool binary);
VoxelGrid voxel_from_json(const Json& j, const std::string& path = "<memory>");
void save_voxels(const std::filesystem::path& path, const VoxelGrid& v, bool binary);
VoxelGrid load_voxels(const std::filesystem::path& path);

struct TriangleMesh {
  std::vector<Vec3d> vertices;
  std::vector<std::array<int, 3>> triangles;
};

TriangleMesh boxes_to_mesh(const std::vector<Obbd>& boxes);
void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh);

}  // namespace grass
