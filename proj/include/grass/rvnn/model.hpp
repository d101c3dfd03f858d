#pragma once

#include "grass/core/checkpoint.hpp"
#include "grass/core/graph.hpp"
#include "grass/shape/hierarchy.hpp"
#include "grass/shape/obb.hpp"
#include "grass/shape/symmetry.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <utility>

namespace grass {

inline constexpr int kBoxVectorSize = 12;
inline constexpr int kNodeClasses = 3;
inline const std::string kRvnnCheckpointKind = "rvnn/v1";

struct RvnnConfig {
  int n = 80;
  int hidden = 100;
  int classifier_hidden = 100;

  Json to_json() const;
  static RvnnConfig from_json(const Json& j, const std::string& path = "<memory>");
  bool operator==(const RvnnConfig&) const = default;
};

// Boxes and symmetry vectors are scaled into the tanh range before they
// reach the networks: every box parameter is halved, and the symmetry type
// code and geometry are halved while the normalized fold is kept.
Vector box_to_net(const Obbd& b);
Obbd net_to_box(const Vector& v);
Vector symvec_to_net(const SymmetryVector& p);
SymmetryVector net_to_symvec(const Vector& v);
inline Vector sym_to_net(const SymmetrySpecd& s) { return symvec_to_net(sym_to_vec(s)); }
inline SymmetrySpecd net_to_sym(const Vector& v) { return vec_to_sym(net_to_symvec(v)); }

// Class index of a node type in classifier outputs.
inline int node_class(NodeType t) { return static_cast<int>(t); }

// Encoder, decoder and classifier networks over one ParameterStore.
//
// Box units are single tanh layers. Adjacency and symmetry units are
// tanh(hidden) -> tanh(output). The classifier is tanh(hidden) -> 3 logits.
class RvnnModel {
 public:
  RvnnModel() = default;
  RvnnModel(RvnnConfig config, ParameterStore store);

  // Gaussian(0, 0.05) weights and zero biases.
  static RvnnModel create(const RvnnConfig& config, std::uint64_t seed);
  static std::vector<std::string> parameter_names();

  const RvnnConfig& config() const { return config_; }
  int n() const { return config_.n; }
  ParameterStore& store() { return store_; }
  const ParameterStore& store() const { return store_; }

  // Graph forms; rows are samples, inputs and outputs in network space.
  Var leaf_encoder(Graph& g, Var boxes) const;
  Var leaf_decoder(Graph& g, Var codes) const;
  Var adj_encoder(Graph& g, Var left, Var right) const;
  // n -> 2n: left child code then right child code.
  Var adj_decoder(Graph& g, Var codes) const;
  Var sym_encoder(Graph& g, Var child, Var params) const;
  // n -> n + 8: child code then symmetry parameters.
  Var sym_decoder(Graph& g, Var codes) const;
  Var classifier_logits(Graph& g, Var codes) const;

  // Plain evaluation on row batches (no tape).
  Matrix leaf_encoder(const Matrix& boxes) const;
  Matrix leaf_decoder(const Matrix& codes) const;
  Matrix adj_encoder(const Matrix& left, const Matrix& right) const;
  Matrix adj_decoder(const Matrix& codes) const;
  Matrix sym_encoder(const Matrix& child, const Matrix& params) const;
  Matrix sym_decoder(const Matrix& codes) const;
  Matrix classifier_probabilities(const Matrix& codes) const;

  // Single-node conveniences in shape units.
  Vector encode_leaf(const Obbd& b) const;
  Obbd decode_leaf(const Vector& code) const;
  Vector encode_adj(const Vector& x1, const Vector& x2) const;
  std::pair<Vector, Vector> decode_adj(const Vector& y) const;
  // `p` is a raw 8-D symmetry vector as produced by sym_to_vec.
  Vector encode_sym(const Vector& x, const SymmetryVector& p) const;
  std::pair<Vector, SymmetryVector> decode_sym(const Vector& y) const;
  // Probabilities over {adjacency, symmetry, leaf}.
  Eigen::Vector3d classify_node(const Vector& code) const;

 private:
  Matrix dense(const Matrix& x, const std::string& layer) const;

  RvnnConfig config_;
  ParameterStore store_;
};

void save_rvnn(const std::filesystem::path& path, const RvnnModel& model, bool include_optimizer_state = true,
               const Json& meta = Json::object());
// Throws FormatError on a wrong kind or missing parameters.
RvnnModel load_rvnn(const std::filesystem::path& path);
RvnnModel rvnn_from_checkpoint(const Checkpoint& cp, const std::string& path);

}  // namespace grass
