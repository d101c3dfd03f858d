#pragma once

#include "grass/data/io.hpp"
#include "grass/data/voxel.hpp"
#include "grass/rvnn/train.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <span>

namespace grass {

inline const std::string kGeoCheckpointKind = "grass-geo/v1";
inline constexpr int kPartCodeSize = 32;

// Leaf code, parent code and root code of a leaf node. A root leaf repeats
// its own code three times. Throws std::out_of_range for a bad index,
// std::invalid_argument for a non-leaf or a missing code.
Vector sarf(const Hierarchy& h, int leaf);

struct GeoConfig {
  int resolution = 16;
  // SARF width, 3n.
  int sarf_size = 240;
  // Encoder hidden widths; the decoder mirrors them.
  std::vector<int> encoder_hidden{512, 128};
  std::vector<int> map_hidden{256, 128};

  Json to_json() const;
  static GeoConfig from_json(const Json& j, const std::string& path = "<memory>");
  bool operator==(const GeoConfig&) const = default;
};

// Dense voxel autoencoder and SARF mapping network sharing the 32-D code.
// Hidden and code layers are tanh; the decoder ends in a sigmoid.
class GeoModel {
 public:
  GeoModel() = default;
  GeoModel(GeoConfig config, ParameterStore store);
  static GeoModel create(const GeoConfig& config, std::uint64_t seed);

  const GeoConfig& config() const { return config_; }
  ParameterStore& store() { return store_; }
  const ParameterStore& store() const { return store_; }
  int voxel_count() const { return config_.resolution * config_.resolution * config_.resolution; }

  // Rows are samples; grids are flattened x-fastest occupancies.
  Var encoder(Graph& g, Var grids) const;
  Var decoder_logits(Graph& g, Var codes) const;
  Var mapper(Graph& g, Var sarfs) const;

  Vector geo_encode(const VoxelGrid& v) const;
  VoxelGrid geo_decode(const Vector& code) const;
  Vector geo_map(const Vector& sarf) const;
  // geo_decode(geo_map(sarf)), optionally binarized at 0.5.
  VoxelGrid synthesize_part(const Vector& sarf, bool binary = false) const;

 private:
  Matrix forward(Matrix x, const std::string& prefix, int layers) const;

  GeoConfig config_;
  ParameterStore store_;
};

struct GeoSample {
  Vector sarf;
  VoxelGrid grid;
};

// One sample per leaf of each shape's inferred hierarchy; SARFs use the
// codes of known-topology decoding from the encoded root and targets are the
// leaf parts voxelized in their own box frame.
std::vector<GeoSample> make_geo_samples(const RvnnModel& model, const std::vector<ShapeRecord>& shapes,
                                        int resolution);

struct GeoTrainConfig {
  int epochs = 30;
  int batch_size = 32;
  double learning_rate = 1e-3;
  // Weight of the squared code distance against the per-voxel cross-entropy.
  double map_weight = 1.0;
  std::uint64_t seed = 1;
  std::optional<std::filesystem::path> recovery_checkpoint;

  Json to_json() const;
  static GeoTrainConfig from_json(const Json& j, const std::string& path = "<memory>");
  void validate() const;
};

struct GeoEpochLog {
  int epoch = 0;
  double loss = 0.0;
  // Mean per-voxel sigmoid cross-entropy of the autoencoder path.
  double reconstruction = 0.0;
  // Mean squared distance between mapped and encoded codes.
  double mapping = 0.0;
};

struct GeoTrainLog {
  // Entry 0 holds the initial losses over the whole set.
  std::vector<GeoEpochLog> epochs;
  Json to_json() const;
};

GeoEpochLog evaluate_geometry_loss(const GeoModel& model, std::span<const GeoSample> samples, double map_weight = 1.0);

// Joint training of both paths. Non-finite losses restore the parameters of
// the epoch start, write the recovery checkpoint if configured and throw
// DivergenceError.
GeoTrainLog train_geometry(GeoModel& model, std::span<const GeoSample> samples, const GeoTrainConfig& config,
                           const std::function<void(const GeoEpochLog&)>& on_epoch = {});

struct GeoIou {
  double autoencoder = 0.0;
  double mapped = 0.0;
};
GeoIou mean_iou(const GeoModel& model, std::span<const GeoSample> samples);

// Synthesized soft grids for the leaves of `h` in node order; `h` must carry
// codes.
std::vector<VoxelGrid> synthesize_leaves(const GeoModel& model, const Hierarchy& h);

// Global grid over [-1, 1]^3 with `resolution` cells per side.
double global_cell_coordinate(int i, int resolution);

// Every global cell center inside a box is mapped to the box frame, the
// part grid is sampled trilinearly there, and the maximum over boxes is
// kept. Symmetry images reuse their generator's grid. `leaf_grids` follows
// the leaf order of `h`.
VoxelGrid assemble_global_volume(const Hierarchy& h, std::span<const VoxelGrid> leaf_grids, int resolution = 64,
                                 int threads = 1);
// Max-embeds one part grid placed in `box`.
void embed_part(VoxelGrid& global, const Obbd& box, const VoxelGrid& part);
// Trilinear sample of a part grid at box-local coordinates in [-0.5, 0.5]^3;
// zero outside the lattice.
double sample_part(const VoxelGrid& part, const Vec3d& local);

// Boundary faces between cells at or above `iso` and the rest (including
// outside the grid), two triangles each, outward facing, with shared
// vertices; coordinates as for the global grid.
TriangleMesh extract_mesh(const VoxelGrid& v, float iso = 0.5f);

void save_geometry(const std::filesystem::path& path, const GeoModel& model, bool include_optimizer_state = false);
GeoModel load_geometry(const std::filesystem::path& path);

}  // namespace grass
