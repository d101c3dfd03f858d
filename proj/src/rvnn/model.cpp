#include "grass/rvnn/model.hpp"

#include "grass/shape/json.hpp"

#include <stdexcept>
#include <tuple>

namespace grass {

namespace {

constexpr double kNetScale = 0.5;

struct Layer {
  const char* name;
  int out;
  int in;
};

std::vector<Layer> layers(const RvnnConfig& c) {
  const int n = c.n, h = c.hidden, m = kSymmetryVectorSize;
  return {{"box_enc", n, kBoxVectorSize},  {"box_dec", kBoxVectorSize, n}, {"adj_enc.1", h, 2 * n},
          {"adj_enc.2", n, h},             {"adj_dec.1", h, n},            {"adj_dec.2", 2 * n, h},
          {"sym_enc.1", h, n + m},         {"sym_enc.2", n, h},            {"sym_dec.1", h, n},
          {"sym_dec.2", n + m, h},         {"cls.1", c.classifier_hidden, n}, {"cls.2", kNodeClasses, c.classifier_hidden}};
}

std::string w(const std::string& layer) { return layer + ".w"; }
std::string b(const std::string& layer) { return layer + ".b"; }

Matrix row(const Vector& v) { return v.transpose(); }

}  // namespace

Json RvnnConfig::to_json() const { return {{"n", n}, {"hidden", hidden}, {"classifier_hidden", classifier_hidden}}; }

RvnnConfig RvnnConfig::from_json(const Json& j, const std::string& path) {
  RvnnConfig c;
  c.n = require_field(j, "n", path, "config.n").get<int>();
  c.hidden = require_field(j, "hidden", path, "config.hidden").get<int>();
  c.classifier_hidden = require_field(j, "classifier_hidden", path, "config.classifier_hidden").get<int>();
  if (c.n < 1 || c.hidden < 1 || c.classifier_hidden < 1) throw FormatError(path, "config", "sizes must be positive");
  return c;
}

Vector box_to_net(const Obbd& box) { return kNetScale * obb_to_vec(box); }

Obbd net_to_box(const Vector& v) {
  if (v.size() != kBoxVectorSize) throw ShapeError("box vector must have 12 entries");
  return vec_to_obb<double>(Eigen::Matrix<double, 12, 1>(v / kNetScale));
}

Vector symvec_to_net(const SymmetryVector& p) {
  Vector v = kNetScale * p;
  v[1] = p[1];
  return v;
}

SymmetryVector net_to_symvec(const Vector& v) {
  if (v.size() != kSymmetryVectorSize) throw ShapeError("symmetry vector must have 8 entries");
  SymmetryVector p = v / kNetScale;
  p[1] = v[1];
  return p;
}

RvnnModel::RvnnModel(RvnnConfig config, ParameterStore store) : config_(config), store_(std::move(store)) {
  for (const auto& l : layers(config_)) {
    for (const auto& [name, rows, cols] : {std::tuple{w(l.name), l.out, l.in}, std::tuple{b(l.name), 1, l.out}}) {
      if (!store_.contains(name)) throw std::invalid_argument("rvnn parameter " + name + " is missing");
      const auto& t = store_.value(name);
      if (t.rows() != rows || t.cols() != cols) {
        throw ShapeError("rvnn parameter " + name + " has shape " + t.shape_string());
      }
    }
  }
}

RvnnModel RvnnModel::create(const RvnnConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  ParameterStore store;
  for (const auto& l : layers(config)) {
    store.add_gaussian(w(l.name), {l.out, l.in}, rng);
    store.add_zeros(b(l.name), {l.out});
  }
  return RvnnModel(config, std::move(store));
}

std::vector<std::string> RvnnModel::parameter_names() {
  std::vector<std::string> out;
  for (const auto& l : layers(RvnnConfig{})) {
    out.push_back(w(l.name));
    out.push_back(b(l.name));
  }
  return out;
}

Var RvnnModel::leaf_encoder(Graph& g, Var boxes) const { return g.tanh(g.linear(boxes, "box_enc.w", "box_enc.b")); }

Var RvnnModel::leaf_decoder(Graph& g, Var codes) const { return g.tanh(g.linear(codes, "box_dec.w", "box_dec.b")); }

Var RvnnModel::adj_encoder(Graph& g, Var left, Var right) const {
  const Var h = g.tanh(g.linear(g.concat({left, right}), "adj_enc.1.w", "adj_enc.1.b"));
  return g.tanh(g.linear(h, "adj_enc.2.w", "adj_enc.2.b"));
}

Var RvnnModel::adj_decoder(Graph& g, Var codes) const {
  const Var h = g.tanh(g.linear(codes, "adj_dec.1.w", "adj_dec.1.b"));
  return g.tanh(g.linear(h, "adj_dec.2.w", "adj_dec.2.b"));
}

Var RvnnModel::sym_encoder(Graph& g, Var child, Var params) const {
  const Var h = g.tanh(g.linear(g.concat({child, params}), "sym_enc.1.w", "sym_enc.1.b"));
  return g.tanh(g.linear(h, "sym_enc.2.w", "sym_enc.2.b"));
}

Var RvnnModel::sym_decoder(Graph& g, Var codes) const {
  const Var h = g.tanh(g.linear(codes, "sym_dec.1.w", "sym_dec.1.b"));
  return g.tanh(g.linear(h, "sym_dec.2.w", "sym_dec.2.b"));
}

Var RvnnModel::classifier_logits(Graph& g, Var codes) const {
  const Var h = g.tanh(g.linear(codes, "cls.1.w", "cls.1.b"));
  return g.linear(h, "cls.2.w", "cls.2.b");
}

Matrix RvnnModel::dense(const Matrix& x, const std::string& layer) const {
  const Matrix& W = store_.value(w(layer)).matrix();
  const Matrix& bias = store_.value(b(layer)).matrix();
  if (x.cols() != W.cols()) {
    throw ShapeError("layer " + layer + " expects width " + std::to_string(W.cols()) + ", got " +
                     std::to_string(x.cols()));
  }
  Matrix out = x * W.transpose();
  out.rowwise() += bias.row(0);
  return out;
}

Matrix RvnnModel::leaf_encoder(const Matrix& boxes) const { return dense(boxes, "box_enc").array().tanh(); }

Matrix RvnnModel::leaf_decoder(const Matrix& codes) const { return dense(codes, "box_dec").array().tanh(); }

Matrix RvnnModel::adj_encoder(const Matrix& left, const Matrix& right) const {
  Matrix x(left.rows(), left.cols() + right.cols());
  x << left, right;
  const Matrix h = dense(x, "adj_enc.1").array().tanh();
  return dense(h, "adj_enc.2").array().tanh();
}

Matrix RvnnModel::adj_decoder(const Matrix& codes) const {
  const Matrix h = dense(codes, "adj_dec.1").array().tanh();
  return dense(h, "adj_dec.2").array().tanh();
}

Matrix RvnnModel::sym_encoder(const Matrix& child, const Matrix& params) const {
  Matrix x(child.rows(), child.cols() + params.cols());
  x << child, params;
  const Matrix h = dense(x, "sym_enc.1").array().tanh();
  return dense(h, "sym_enc.2").array().tanh();
}

Matrix RvnnModel::sym_decoder(const Matrix& codes) const {
  const Matrix h = dense(codes, "sym_dec.1").array().tanh();
  return dense(h, "sym_dec.2").array().tanh();
}

Matrix RvnnModel::classifier_probabilities(const Matrix& codes) const {
  const Matrix h = dense(codes, "cls.1").array().tanh();
  Matrix z = dense(h, "cls.2");
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    z.row(i).array() -= z.row(i).maxCoeff();
    z.row(i) = z.row(i).array().exp();
    z.row(i) /= z.row(i).sum();
  }
  return z;
}

Vector RvnnModel::encode_leaf(const Obbd& box) const { return leaf_encoder(row(box_to_net(box))).row(0).transpose(); }

Obbd RvnnModel::decode_leaf(const Vector& code) const { return net_to_box(leaf_decoder(row(code)).row(0).transpose()); }

Vector RvnnModel::encode_adj(const Vector& x1, const Vector& x2) const {
  return adj_encoder(row(x1), row(x2)).row(0).transpose();
}

std::pair<Vector, Vector> RvnnModel::decode_adj(const Vector& y) const {
  const Matrix out = adj_decoder(row(y));
  return {out.row(0).head(n()).transpose(), out.row(0).tail(n()).transpose()};
}

Vector RvnnModel::encode_sym(const Vector& x, const SymmetryVector& p) const {
  return sym_encoder(row(x), row(symvec_to_net(p))).row(0).transpose();
}

std::pair<Vector, SymmetryVector> RvnnModel::decode_sym(const Vector& y) const {
  const Matrix out = sym_decoder(row(y));
  return {out.row(0).head(n()).transpose(), net_to_symvec(out.row(0).tail(kSymmetryVectorSize).transpose())};
}

Eigen::Vector3d RvnnModel::classify_node(const Vector& code) const {
  return classifier_probabilities(row(code)).row(0).transpose();
}

void save_rvnn(const std::filesystem::path& path, const RvnnModel& model, bool include_optimizer_state,
               const Json& meta) {
  Json m = meta;
  m["config"] = model.config().to_json();
  save_checkpoint(path, kRvnnCheckpointKind, model.store(), include_optimizer_state, m);
}

RvnnModel rvnn_from_checkpoint(const Checkpoint& cp, const std::string& path) {
  if (cp.kind != kRvnnCheckpointKind) {
    throw FormatError(path, "kind", "expected " + kRvnnCheckpointKind + ", found " + cp.kind);
  }
  const RvnnConfig config = RvnnConfig::from_json(require_field(cp.meta, "config", path, "meta.config"), path);
  try {
    return RvnnModel(config, cp.store);
  } catch (const std::exception& e) {
    throw FormatError(path, "arrays", e.what());
  }
}

RvnnModel load_rvnn(const std::filesystem::path& path) {
  return rvnn_from_checkpoint(load_checkpoint(path), path.string());
}

}  // namespace grass
