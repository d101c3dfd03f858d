#include "grass/geometry/part_geometry.hpp"

#include "grass/core/random.hpp"
#include "grass/rvnn/infer.hpp"
#include "grass/shape/json.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>
#include <unordered_map>

namespace grass {

namespace {

struct Layer {
  std::string name;
  int out;
  int in;
};

// Encoder, decoder and mapper layer stacks, named <prefix>.<k>.
std::vector<Layer> stack(const std::string& prefix, std::vector<int> widths) {
  std::vector<Layer> out;
  for (std::size_t k = 1; k < widths.size(); ++k) {
    out.push_back({prefix + "." + std::to_string(k), widths[k], widths[k - 1]});
  }
  return out;
}

std::vector<Layer> all_layers(const GeoConfig& c) {
  const int v = c.resolution * c.resolution * c.resolution;
  std::vector<int> enc{v};
  enc.insert(enc.end(), c.encoder_hidden.begin(), c.encoder_hidden.end());
  enc.push_back(kPartCodeSize);
  std::vector<int> dec(enc.rbegin(), enc.rend());
  std::vector<int> map{c.sarf_size};
  map.insert(map.end(), c.map_hidden.begin(), c.map_hidden.end());
  map.push_back(kPartCodeSize);
  std::vector<Layer> out = stack("geo_enc", enc);
  for (auto& l : stack("geo_dec", dec)) out.push_back(l);
  for (auto& l : stack("geo_map", map)) out.push_back(l);
  return out;
}

int depth(const GeoConfig& c, const std::string& prefix) {
  return prefix == "geo_map" ? int(c.map_hidden.size()) + 1 : int(c.encoder_hidden.size()) + 1;
}

// Occupancies are centered to [-1, 1] before the encoder.
Matrix grid_rows(std::span<const VoxelGrid* const> grids) {
  Matrix m(static_cast<Eigen::Index>(grids.size()), static_cast<Eigen::Index>(grids[0]->size()));
  for (std::size_t i = 0; i < grids.size(); ++i) {
    const auto& v = grids[i]->values;
    for (std::size_t j = 0; j < v.size(); ++j) m(i, j) = 2.0 * v[j] - 1.0;
  }
  return m;
}

Matrix target_rows(std::span<const VoxelGrid* const> grids) {
  Matrix m(static_cast<Eigen::Index>(grids.size()), static_cast<Eigen::Index>(grids[0]->size()));
  for (std::size_t i = 0; i < grids.size(); ++i) {
    const auto& v = grids[i]->values;
    for (std::size_t j = 0; j < v.size(); ++j) m(i, j) = v[j];
  }
  return m;
}

Var stack_forward(Graph& g, Var x, const std::string& prefix, int layers, bool last_tanh) {
  for (int k = 1; k <= layers; ++k) {
    const std::string name = prefix + "." + std::to_string(k);
    x = g.linear(x, name + ".w", name + ".b");
    if (k < layers || last_tanh) x = g.tanh(x);
  }
  return x;
}

struct BatchTerms {
  Var total;
  Var reconstruction;
  Var mapping;
};

BatchTerms batch_loss(Graph& g, const GeoModel& m, std::span<const GeoSample> samples, const std::vector<int>& idx,
                      double map_weight) {
  std::vector<const VoxelGrid*> grids;
  Matrix sarfs(static_cast<Eigen::Index>(idx.size()), m.config().sarf_size);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    grids.push_back(&samples[idx[i]].grid);
    sarfs.row(i) = samples[idx[i]].sarf.transpose();
  }
  const double b = static_cast<double>(idx.size());
  const Var code = m.encoder(g, g.constant(grid_rows(grids)));
  const Var logits = m.decoder_logits(g, code);
  const Var ce = g.affine(g.sigmoid_cross_entropy(logits, g.constant(target_rows(grids))), 1.0 / (b * m.voxel_count()));
  const Var mapped = m.mapper(g, g.constant(sarfs));
  const Var eu = g.affine(g.squared_error(mapped, code), 1.0 / b);
  return {g.add(ce, g.affine(eu, map_weight)), ce, eu};
}

}  // namespace

Vector sarf(const Hierarchy& h, int leaf) {
  if (leaf < 0 || leaf > h.root()) throw std::out_of_range("node " + std::to_string(leaf) + " is not in the hierarchy");
  if (h[leaf].type != NodeType::leaf) throw std::invalid_argument("node " + std::to_string(leaf) + " is not a leaf");
  const auto parents = h.parents();
  const int parent = parents[leaf] < 0 ? leaf : parents[leaf];
  for (int i : {leaf, parent, h.root()}) {
    if (!h[i].code) throw std::invalid_argument("node " + std::to_string(i) + " has no code");
  }
  const Vector& a = *h[leaf].code;
  Vector out(3 * a.size());
  out << a, *h[parent].code, *h[h.root()].code;
  return out;
}

Json GeoConfig::to_json() const {
  return {{"resolution", resolution}, {"sarf_size", sarf_size}, {"encoder_hidden", encoder_hidden}, {"map_hidden", map_hidden}};
}

GeoConfig GeoConfig::from_json(const Json& j, const std::string& path) {
  GeoConfig c;
  try {
    c.resolution = require_field(j, "resolution", path, "config.resolution").get<int>();
    c.sarf_size = require_field(j, "sarf_size", path, "config.sarf_size").get<int>();
    c.encoder_hidden = require_field(j, "encoder_hidden", path, "config.encoder_hidden").get<std::vector<int>>();
    c.map_hidden = require_field(j, "map_hidden", path, "config.map_hidden").get<std::vector<int>>();
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatError(path, "config", e.what());
  }
  auto positive = [](const std::vector<int>& v) { return std::all_of(v.begin(), v.end(), [](int w) { return w > 0; }); };
  if (c.resolution < 3 || c.sarf_size < 1 || !positive(c.encoder_hidden) || !positive(c.map_hidden)) {
    throw FormatError(path, "config", "sizes must be positive and the resolution at least 3");
  }
  return c;
}

GeoModel::GeoModel(GeoConfig config, ParameterStore store) : config_(std::move(config)), store_(std::move(store)) {
  for (const auto& l : all_layers(config_)) {
    for (const auto& [name, rows, cols] : {std::tuple{l.name + ".w", l.out, l.in}, std::tuple{l.name + ".b", 1, l.out}}) {
      if (!store_.contains(name)) throw std::invalid_argument("geometry parameter " + name + " is missing");
      const auto& t = store_.value(name);
      if (t.rows() != rows || t.cols() != cols) throw ShapeError("geometry parameter " + name + " has shape " + t.shape_string());
    }
  }
}

GeoModel GeoModel::create(const GeoConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  ParameterStore store;
  for (const auto& l : all_layers(config)) {
    store.add_gaussian(l.name + ".w", {l.out, l.in}, rng, 1.0 / std::sqrt(double(l.in)));
    store.add_zeros(l.name + ".b", {l.out});
  }
  return GeoModel(config, std::move(store));
}

Var GeoModel::encoder(Graph& g, Var grids) const {
  return stack_forward(g, grids, "geo_enc", depth(config_, "geo_enc"), true);
}

Var GeoModel::decoder_logits(Graph& g, Var codes) const {
  return stack_forward(g, codes, "geo_dec", depth(config_, "geo_dec"), false);
}

Var GeoModel::mapper(Graph& g, Var sarfs) const {
  return stack_forward(g, sarfs, "geo_map", depth(config_, "geo_map"), true);
}

Matrix GeoModel::forward(Matrix x, const std::string& prefix, int layers) const {
  for (int k = 1; k <= layers; ++k) {
    const std::string name = prefix + "." + std::to_string(k);
    Matrix y = x * store_.value(name + ".w").matrix().transpose();
    y.rowwise() += store_.value(name + ".b").matrix().row(0);
    x = (k < layers || prefix != "geo_dec") ? Matrix(y.array().tanh()) : y;
  }
  return x;
}

Vector GeoModel::geo_encode(const VoxelGrid& v) const {
  if (v.resolution != config_.resolution) throw ShapeError("voxel grid resolution does not match the model");
  const VoxelGrid* p = &v;
  return forward(grid_rows({&p, 1}), "geo_enc", depth(config_, "geo_enc")).row(0).transpose();
}

VoxelGrid GeoModel::geo_decode(const Vector& code) const {
  if (code.size() != kPartCodeSize) throw ShapeError("part code must have 32 entries");
  const Matrix logits = forward(Matrix(code.transpose()), "geo_dec", depth(config_, "geo_dec"));
  VoxelGrid v(config_.resolution);
  for (std::size_t j = 0; j < v.size(); ++j) {
    // Clamped so outputs stay strictly inside (0, 1) in single precision.
    const double p = 1.0 / (1.0 + std::exp(-std::clamp(logits(0, Eigen::Index(j)), -15.0, 15.0)));
    v.values[j] = static_cast<float>(p);
  }
  return v;
}

Vector GeoModel::geo_map(const Vector& f) const {
  if (f.size() != config_.sarf_size) throw ShapeError("SARF has the wrong size");
  return forward(Matrix(f.transpose()), "geo_map", depth(config_, "geo_map")).row(0).transpose();
}

VoxelGrid GeoModel::synthesize_part(const Vector& f, bool binary) const {
  VoxelGrid v = geo_decode(geo_map(f));
  return binary ? v.binarized() : v;
}

std::vector<GeoSample> make_geo_samples(const RvnnModel& model, const std::vector<ShapeRecord>& shapes,
                                        int resolution) {
  std::vector<GeoSample> out;
  for (const auto& s : shapes) {
    const Hierarchy h = infer_hierarchy(s.graph, model);
    const Hierarchy coded = decode_known(model, encode_root(model, h), h);
    for (int i = 0; i <= h.root(); ++i) {
      if (h[i].type != NodeType::leaf) continue;
      std::size_t p = 0;
      while (p < s.graph.parts.size() && s.graph.parts[p].id != h[i].part) ++p;
      if (p == s.graph.parts.size()) throw GraphInvariantError("leaf part " + std::to_string(h[i].part) + " not in shape");
      const PartStyle style = p < s.styles.size() ? s.styles[p] : PartStyle::solid;
      out.push_back({sarf(coded, i), voxelize_part(h[i].box, resolution, style)});
    }
  }
  return out;
}

Json GeoTrainConfig::to_json() const {
  return {{"epochs", epochs}, {"batch_size", batch_size}, {"learning_rate", learning_rate}, {"map_weight", map_weight}, {"seed", seed}};
}

GeoTrainConfig GeoTrainConfig::from_json(const Json& j, const std::string& path) {
  GeoTrainConfig c;
  try {
    if (j.contains("epochs")) c.epochs = j.at("epochs").get<int>();
    if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<int>();
    if (j.contains("learning_rate")) c.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("map_weight")) c.map_weight = j.at("map_weight").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    c.validate();
  } catch (const std::exception& e) {
    throw FormatError(path, "config", e.what());
  }
  return c;
}

void GeoTrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("epochs must be non-negative");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be positive");
  if (!(learning_rate > 0)) throw std::invalid_argument("learning_rate must be positive");
  if (!(map_weight >= 0)) throw std::invalid_argument("map_weight must be non-negative");
}

Json GeoTrainLog::to_json() const {
  Json out = Json::array();
  for (const auto& e : epochs) {
    out.push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"reconstruction", e.reconstruction}, {"mapping", e.mapping}});
  }
  return out;
}

GeoEpochLog evaluate_geometry_loss(const GeoModel& model, std::span<const GeoSample> samples, double map_weight) {
  GeoEpochLog log;
  if (samples.empty()) return log;
  for (std::size_t start = 0; start < samples.size(); start += 64) {
    std::vector<int> idx;
    for (std::size_t i = start; i < std::min(samples.size(), start + 64); ++i) idx.push_back(int(i));
    Graph g(&model.store());
    const BatchTerms t = batch_loss(g, model, samples, idx, map_weight);
    const double k = static_cast<double>(idx.size());
    log.loss += g.forward(t.total)(0, 0) * k;
    log.reconstruction += g.forward(t.reconstruction)(0, 0) * k;
    log.mapping += g.forward(t.mapping)(0, 0) * k;
  }
  const double n = static_cast<double>(samples.size());
  log.loss /= n;
  log.reconstruction /= n;
  log.mapping /= n;
  return log;
}

GeoTrainLog train_geometry(GeoModel& model, std::span<const GeoSample> samples, const GeoTrainConfig& config,
                           const std::function<void(const GeoEpochLog&)>& on_epoch) {
  config.validate();
  if (samples.empty()) throw std::invalid_argument("no geometry samples");
  for (const auto& s : samples) {
    if (s.grid.resolution != model.config().resolution || s.sarf.size() != model.config().sarf_size) {
      throw ShapeError("geometry sample does not match the model configuration");
    }
  }
  GeoTrainLog log;
  log.epochs.push_back(evaluate_geometry_loss(model, samples, config.map_weight));
  if (on_epoch) on_epoch(log.epochs.back());
  OptimizerConfig opt;
  opt.learning_rate = config.learning_rate;
  Rng rng(config.seed);
  std::vector<int> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const ParameterStore snapshot = model.store();
    std::shuffle(order.begin(), order.end(), rng);
    GeoEpochLog e;
    e.epoch = epoch;
    try {
      for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
        const std::vector<int> idx(order.begin() + start,
                                   order.begin() + std::min(order.size(), start + std::size_t(config.batch_size)));
        Graph g(&model.store());
        const BatchTerms t = batch_loss(g, model, samples, idx, config.map_weight);
        const double v = g.forward(t.total)(0, 0);
        if (!std::isfinite(v)) throw NonFiniteError("loss");
        const double k = static_cast<double>(idx.size());
        e.loss += v * k;
        e.reconstruction += g.value(t.reconstruction)(0, 0) * k;
        e.mapping += g.value(t.mapping)(0, 0) * k;
        model.store().zero_grad();
        model.store().accumulate(g.backward(t.total));
        adam_step(model.store(), opt);
      }
    } catch (const NonFiniteError& err) {
      model.store() = snapshot;
      if (config.recovery_checkpoint) save_geometry(*config.recovery_checkpoint, model);
      throw DivergenceError(epoch, err.what());
    }
    const double n = static_cast<double>(samples.size());
    e.loss /= n;
    e.reconstruction /= n;
    e.mapping /= n;
    log.epochs.push_back(e);
    if (on_epoch) on_epoch(e);
  }
  return log;
}

GeoIou mean_iou(const GeoModel& model, std::span<const GeoSample> samples) {
  GeoIou out;
  if (samples.empty()) return out;
  for (const auto& s : samples) {
    out.autoencoder += iou(model.geo_decode(model.geo_encode(s.grid)), s.grid);
    out.mapped += iou(model.synthesize_part(s.sarf), s.grid);
  }
  out.autoencoder /= double(samples.size());
  out.mapped /= double(samples.size());
  return out;
}

std::vector<VoxelGrid> synthesize_leaves(const GeoModel& model, const Hierarchy& h) {
  std::vector<VoxelGrid> out;
  for (int i = 0; i <= h.root(); ++i) {
    if (h[i].type == NodeType::leaf) out.push_back(model.synthesize_part(sarf(h, i)));
  }
  return out;
}

double global_cell_coordinate(int i, int resolution) { return -1.0 + (i + 0.5) * 2.0 / resolution; }

double sample_part(const VoxelGrid& part, const Vec3d& local) {
  const int r = part.resolution;
  // Inverse of part_cell_coordinate.
  const Vec3d u = (local.array() + 0.5) * (r - 2) + 0.5;
  if ((u.array() < 0).any() || (u.array() > r - 1).any()) return 0.0;
  int i0[3];
  double f[3];
  for (int a = 0; a < 3; ++a) {
    i0[a] = std::min(static_cast<int>(std::floor(u[a])), r - 2);
    f[a] = u[a] - i0[a];
  }
  double v = 0.0;
  for (int c = 0; c < 8; ++c) {
    const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
    const double w = (dx ? f[0] : 1 - f[0]) * (dy ? f[1] : 1 - f[1]) * (dz ? f[2] : 1 - f[2]);
    if (w != 0.0) v += w * part.at(i0[0] + dx, i0[1] + dy, i0[2] + dz);
  }
  return v;
}

namespace {

void embed_slab(VoxelGrid& global, const Obbd& box, const VoxelGrid& part, int z_begin, int z_end) {
  const int g = global.resolution;
  // Extent of the part lattice in box-local units.
  const double half = 0.5 * part.resolution / double(part.resolution - 2);
  Vec3d lo = Vec3d::Constant(std::numeric_limits<double>::max()), hi = -lo;
  for (int c = 0; c < 8; ++c) {
    Vec3d p = box.center;
    for (int a = 0; a < 3; ++a) p += ((c >> a) & 1 ? half : -half) * box.dims[a] * box.axis(a);
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  auto range = [&](double a, double b, int& i0, int& i1) {
    i0 = std::max(0, static_cast<int>(std::floor((a + 1.0) * g / 2.0 - 0.5)));
    i1 = std::min(g - 1, static_cast<int>(std::ceil((b + 1.0) * g / 2.0 - 0.5)));
  };
  int x0, x1, y0, y1, z0, z1;
  range(lo.x(), hi.x(), x0, x1);
  range(lo.y(), hi.y(), y0, y1);
  range(lo.z(), hi.z(), z0, z1);
  z0 = std::max(z0, z_begin);
  z1 = std::min(z1, z_end - 1);
  const Eigen::Matrix3d rt = box.rotation().transpose();
  for (int z = z0; z <= z1; ++z) {
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const Vec3d p(global_cell_coordinate(x, g), global_cell_coordinate(y, g), global_cell_coordinate(z, g));
        const Vec3d local = (rt * (p - box.center)).cwiseQuotient(box.dims);
        const float v = static_cast<float>(sample_part(part, local));
        float& cell = global.at(x, y, z);
        cell = std::max(cell, v);
      }
    }
  }
}

}  // namespace

void embed_part(VoxelGrid& global, const Obbd& box, const VoxelGrid& part) {
  if (part.resolution < 3) throw std::invalid_argument("part grid resolution must be at least 3");
  embed_slab(global, box, part, 0, global.resolution);
}

VoxelGrid assemble_global_volume(const Hierarchy& h, std::span<const VoxelGrid> leaf_grids, int resolution,
                                 int threads) {
  if (resolution < 1) throw std::invalid_argument("global resolution must be positive");
  VoxelGrid global(resolution);
  if (h.empty()) return global;
  std::vector<int> leaf_slot(h.nodes.size(), -1);
  int k = 0;
  for (int i = 0; i <= h.root(); ++i) {
    if (h[i].type == NodeType::leaf) leaf_slot[i] = k++;
  }
  if (k != int(leaf_grids.size())) {
    throw std::invalid_argument("expected " + std::to_string(k) + " leaf grids, got " + std::to_string(leaf_grids.size()));
  }
  const auto leaves = expand_leaves(h);
  // Slabs along z are disjoint, so threads write to separate cells.
  auto work = [&](int z0, int z1) {
    for (const auto& l : leaves) embed_slab(global, l.box, leaf_grids[leaf_slot[l.node]], z0, z1);
  };
  const int parts = std::clamp(threads, 1, resolution);
  if (parts == 1) {
    work(0, resolution);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (resolution + parts - 1) / parts;
    for (int p = 0; p < parts; ++p) pool.emplace_back(work, p * chunk, std::min(resolution, (p + 1) * chunk));
    for (auto& t : pool) t.join();
  }
  return global;
}

TriangleMesh extract_mesh(const VoxelGrid& v, float iso) {
  static const int quads[6][4] = {{0, 4, 6, 2}, {1, 3, 7, 5}, {0, 1, 5, 4}, {2, 6, 7, 3}, {0, 2, 3, 1}, {4, 5, 7, 6}};
  static const int step[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}};
  const int r = v.resolution;
  TriangleMesh m;
  std::unordered_map<long long, int> ids;
  auto vertex = [&](int x, int y, int z) {
    const long long key = (static_cast<long long>(z) * (r + 1) + y) * (r + 1) + x;
    auto [it, fresh] = ids.try_emplace(key, static_cast<int>(m.vertices.size()));
    if (fresh) m.vertices.emplace_back(-1.0 + 2.0 * x / r, -1.0 + 2.0 * y / r, -1.0 + 2.0 * z / r);
    return it->second;
  };
  auto filled = [&](int x, int y, int z) {
    return x >= 0 && y >= 0 && z >= 0 && x < r && y < r && z < r && v.at(x, y, z) >= iso;
  };
  for (int z = 0; z < r; ++z) {
    for (int y = 0; y < r; ++y) {
      for (int x = 0; x < r; ++x) {
        if (!filled(x, y, z)) continue;
        for (int f = 0; f < 6; ++f) {
          if (filled(x + step[f][0], y + step[f][1], z + step[f][2])) continue;
          int c[4];
          for (int j = 0; j < 4; ++j) {
            const int q = quads[f][j];
            c[j] = vertex(x + (q & 1), y + ((q >> 1) & 1), z + ((q >> 2) & 1));
          }
          m.triangles.push_back({c[0], c[1], c[2]});
          m.triangles.push_back({c[0], c[2], c[3]});
        }
      }
    }
  }
  return m;
}

void save_geometry(const std::filesystem::path& path, const GeoModel& model, bool include_optimizer_state) {
  save_checkpoint(path, kGeoCheckpointKind, model.store(), include_optimizer_state, {{"config", model.config().to_json()}});
}

GeoModel load_geometry(const std::filesystem::path& path) {
  Checkpoint cp = load_checkpoint(path);
  const std::string p = path.string();
  if (cp.kind != kGeoCheckpointKind) throw FormatError(p, "kind", "expected " + kGeoCheckpointKind + ", got " + cp.kind);
  const GeoConfig c = GeoConfig::from_json(require_field(cp.meta, "config", p, "meta.config"), p);
  try {
    return GeoModel(c, std::move(cp.store));
  } catch (const std::exception& e) {
    throw FormatError(p, "parameters", e.what());
  }
}

}  // namespace grass
