#include "grass/data/io.hpp"

#include "grass/core/random.hpp"
#include "grass/shape/json.hpp"
#include "grass/shape/relations.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>

namespace grass {

namespace {

std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }

void check_version(const Json& j, int expected, const std::string& path) {
  const Json& v = require_field(j, "schema_version", path, "schema_version");
  if (!v.is_number_integer() || v.get<int>() != expected) {
    throw FormatError(path, "schema_version", "unsupported schema version");
  }
}

}  // namespace

Json shape_to_json(const ShapeRecord& s) {
  Json parts = Json::array();
  for (std::size_t i = 0; i < s.graph.parts.size(); ++i) {
    const auto& p = s.graph.parts[i];
    Json j{{"id", p.id}, {"obb", obb_to_json(p.box)}};
    if (!p.label.empty()) j["label"] = p.label;
    if (i < s.styles.size()) j["style"] = to_string(s.styles[i]);
    parts.push_back(std::move(j));
  }
  Json adjacency = Json::array();
  for (const auto& [a, b] : s.graph.adjacency) adjacency.push_back({a, b});
  Json syms = Json::array();
  for (const auto& r : s.graph.symmetries) {
    Json j = symmetry_to_json(r.spec);
    j["generator"] = r.generator;
    j["members"] = r.members;
    syms.push_back(std::move(j));
  }
  return {{"schema_version", kShapeSchemaVersion},
          {"id", s.id},
          {"category", s.category},
          {"subclass", s.subclass},
          {"parts", std::move(parts)},
          {"adjacency", std::move(adjacency)},
          {"symmetries", std::move(syms)}};
}

ShapeRecord shape_from_json(const Json& j, const std::string& path) {
  check_version(j, kShapeSchemaVersion, path);
  ShapeRecord s;
  s.id = require_field(j, "id", path, "id").get<std::string>();
  s.category = require_field(j, "category", path, "category").get<std::string>();
  if (j.contains("subclass")) s.subclass = j.at("subclass").get<std::string>();
  const Json& parts = require_field(j, "parts", path, "parts");
  bool all_styles = true;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const std::string f = "parts[" + std::to_string(i) + "]";
    Part p;
    p.id = require_field(parts[i], "id", path, f + ".id").get<int>();
    if (parts[i].contains("label")) p.label = parts[i].at("label").get<std::string>();
    p.box = obb_from_json(require_field(parts[i], "obb", path, "obb"), path, "obb");
    s.graph.parts.push_back(std::move(p));
    if (parts[i].contains("style")) {
      try {
        s.styles.push_back(part_style_from_string(parts[i].at("style").get<std::string>()));
      } catch (const std::invalid_argument& e) {
        throw FormatError(path, f + ".style", e.what());
      }
    } else {
      all_styles = false;
    }
  }
  if (!all_styles) s.styles.clear();
  const bool has_relations = j.contains("adjacency") || j.contains("symmetries");
  if (!has_relations) {
    const auto detected = detect_relations(s.graph.parts);
    s.graph.adjacency = detected.adjacency;
    s.graph.symmetries = detected.symmetries;
    return s;
  }
  if (j.contains("adjacency")) {
    for (const auto& e : j.at("adjacency")) {
      if (!e.is_array() || e.size() != 2) throw FormatError(path, "adjacency", "edges must be id pairs");
      s.graph.adjacency.emplace_back(e[0].get<int>(), e[1].get<int>());
    }
  }
  if (j.contains("symmetries")) {
    const Json& syms = j.at("symmetries");
    for (std::size_t i = 0; i < syms.size(); ++i) {
      const std::string f = "symmetries[" + std::to_string(i) + "]";
      SymmetryRelation r;
      r.spec = symmetry_from_json(syms[i], path, f);
      r.generator = require_field(syms[i], "generator", path, f + ".generator").get<int>();
      r.members = require_field(syms[i], "members", path, f + ".members").get<std::vector<int>>();
      s.graph.symmetries.push_back(std::move(r));
    }
  }
  try {
    validate(s.graph);
  } catch (const GraphInvariantError& e) {
    throw FormatError(path, "parts", e.what());
  }
  return s;
}

void save_shape(const std::filesystem::path& path, const ShapeRecord& s) { write_json_file(path, shape_to_json(s)); }

ShapeRecord load_shape(const std::filesystem::path& path) { return shape_from_json(read_json_file(path), path.string()); }

std::map<std::string, int> DatasetManifest::category_counts() const {
  std::map<std::string, int> out;
  for (const auto& e : entries) ++out[e.category];
  return out;
}

std::map<std::string, int> DatasetManifest::subclass_counts() const {
  std::map<std::string, int> out;
  for (const auto& e : entries) ++out[e.category + "/" + e.subclass];
  return out;
}

std::vector<std::size_t> DatasetManifest::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].split == s) out.push_back(i);
  }
  return out;
}

void assign_splits(DatasetManifest& m, double train_fraction, std::uint64_t seed) {
  const std::size_t n = m.entries.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  for (std::size_t k = 0; k < n; ++k) m.entries[order[k]].split = k < n_train ? Split::train : Split::test;
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  Json entries = Json::array();
  for (const auto& e : m.entries) {
    entries.push_back({{"path", e.path}, {"category", e.category}, {"subclass", e.subclass}, {"split", to_string(e.split)}});
  }
  Json counts = Json::object();
  for (const auto& [k, v] : m.category_counts()) counts[k] = v;
  Json sub = Json::object();
  for (const auto& [k, v] : m.subclass_counts()) sub[k] = v;
  write_json_file(path, {{"schema_version", kManifestSchemaVersion},
                         {"seed", m.seed},
                         {"counts", counts},
                         {"subclass_counts", sub},
                         {"entries", entries}});
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  const Json j = read_json_file(path);
  const std::string p = path.string();
  check_version(j, kManifestSchemaVersion, p);
  DatasetManifest m;
  m.seed = require_field(j, "seed", p, "seed").get<std::uint64_t>();
  const Json& entries = require_field(j, "entries", p, "entries");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const std::string f = "entries[" + std::to_string(i) + "]";
    ManifestEntry e;
    e.path = require_field(entries[i], "path", p, f + ".path").get<std::string>();
    e.category = require_field(entries[i], "category", p, f + ".category").get<std::string>();
    e.subclass = require_field(entries[i], "subclass", p, f + ".subclass").get<std::string>();
    const auto split = require_field(entries[i], "split", p, f + ".split").get<std::string>();
    if (split != "train" && split != "test") throw FormatError(p, f + ".split", "must be train or test");
    e.split = split == "train" ? Split::train : Split::test;
    m.entries.push_back(std::move(e));
  }
  if (j.contains("counts") && j.at("counts") != Json(m.category_counts())) {
    throw FormatError(p, "counts", "category counts do not match entries");
  }
  return m;
}

std::vector<const ShapeRecord*> Dataset::split(Split s) const {
  std::vector<const ShapeRecord*> out;
  for (std::size_t i : manifest.indices(s)) out.push_back(&shapes[i]);
  return out;
}

Dataset write_dataset(const std::filesystem::path& dir, std::vector<ShapeRecord> shapes, double train_fraction,
                      std::uint64_t seed) {
  Dataset d;
  d.manifest.seed = seed;
  for (const auto& s : shapes) {
    const std::string file = s.id + ".json";
    save_shape(dir / file, s);
    d.manifest.entries.push_back({file, s.category, s.subclass, Split::train});
  }
  assign_splits(d.manifest, train_fraction, seed);
  save_manifest(dir / "manifest.json", d.manifest);
  d.shapes = std::move(shapes);
  return d;
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  Dataset d;
  d.manifest = load_manifest(manifest_path);
  for (const auto& e : d.manifest.entries) d.shapes.push_back(load_shape(manifest_path.parent_path() / e.path));
  return d;
}

Json voxel_to_json(const VoxelGrid& v, bool binary) {
  std::string payload;
  if (binary) {
    std::vector<std::uint8_t> bytes(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) bytes[i] = v.values[i] >= 0.5f ? 1 : 0;
    payload = base64_encode(bytes);
  } else {
    std::vector<std::uint8_t> bytes(v.size() * 4);
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::uint32_t bits = std::bit_cast<std::uint32_t>(v.values[i]);
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
      std::memcpy(bytes.data() + 4 * i, &bits, 4);
    }
    payload = base64_encode(bytes);
  }
  return {{"schema_version", kVoxelSchemaVersion},
          {"R", v.resolution},
          {"order", "x-fastest"},
          {"encoding", binary ? "u8" : "f32le"},
          {"data", payload}};
}

VoxelGrid voxel_from_json(const Json& j, const std::string& path) {
  check_version(j, kVoxelSchemaVersion, path);
  const int r = require_field(j, "R", path, "R").get<int>();
  if (r < 1) throw FormatError(path, "R", "resolution must be positive");
  if (require_field(j, "order", path, "order").get<std::string>() != "x-fastest") {
    throw FormatError(path, "order", "only x-fastest order is supported");
  }
  const auto enc = require_field(j, "encoding", path, "encoding").get<std::string>();
  std::vector<std::uint8_t> bytes;
  try {
    bytes = base64_decode(require_field(j, "data", path, "data").get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw FormatError(path, "data", e.what());
  }
  VoxelGrid v(r);
  if (enc == "u8") {
    if (bytes.size() != v.size()) throw FormatError(path, "data", "payload size does not match R");
    for (std::size_t i = 0; i < v.size(); ++i) v.values[i] = bytes[i] ? 1.0f : 0.0f;
  } else if (enc == "f32le") {
    if (bytes.size() != v.size() * 4) throw FormatError(path, "data", "payload size does not match R");
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::uint32_t bits;
      std::memcpy(&bits, bytes.data() + 4 * i, 4);
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
      v.values[i] = std::bit_cast<float>(bits);
    }
  } else {
    throw FormatError(path, "encoding", "unknown encoding '" + enc + "'");
  }
  return v;
}

void save_voxels(const std::filesystem::path& path, const VoxelGrid& v, bool binary) {
  write_json_file(path, voxel_to_json(v, binary));
}

VoxelGrid load_voxels(const std::filesystem::path& path) { return voxel_from_json(read_json_file(path), path.string()); }

TriangleMesh boxes_to_mesh(const std::vector<Obbd>& boxes) {
  // Corner bit i selects +axis_i; faces listed counter-clockwise from outside.
  static const int quads[6][4] = {{0, 4, 6, 2}, {1, 3, 7, 5}, {0, 1, 5, 4}, {2, 6, 7, 3}, {0, 2, 3, 1}, {4, 5, 7, 6}};
  TriangleMesh m;
  for (const auto& b : boxes) {
    const int base = static_cast<int>(m.vertices.size());
    for (const auto& c : obb_corners(b)) m.vertices.push_back(c);
    for (const auto& q : quads) {
      m.triangles.push_back({base + q[0], base + q[1], base + q[2]});
      m.triangles.push_back({base + q[0], base + q[2], base + q[3]});
    }
  }
  return m;
}

void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw FormatError(path.string(), "<file>", "cannot open for writing");
  out.precision(17);
  for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& t : mesh.triangles) out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
}

}  // namespace grass
