#include "grass/rvnn/codec.hpp"

#include <algorithm>
#include <functional>
#include <map>

namespace grass {

Hierarchy encode_shape(const RvnnModel& model, const Hierarchy& h) {
  Hierarchy out = h;
  for (auto& n : out.nodes) {
    switch (n.type) {
      case NodeType::leaf:
        n.code = model.encode_leaf(n.box);
        break;
      case NodeType::adjacency:
        n.code = model.encode_adj(*out[n.left].code, *out[n.right].code);
        break;
      case NodeType::symmetry:
        n.code = model.encode_sym(*out[n.left].code, sym_to_vec(n.sym));
        break;
    }
  }
  return out;
}

Vector encode_root(const RvnnModel& model, const Hierarchy& h) {
  if (h.empty()) throw std::invalid_argument("cannot encode an empty hierarchy");
  return *encode_shape(model, h)[h.root()].code;
}

Hierarchy decode_known(const RvnnModel& model, const Vector& root, const Hierarchy& known) {
  if (known.empty()) throw std::invalid_argument("known hierarchy is empty");
  // Same node order as `known`; parents precede children when walking down.
  Hierarchy out = known;
  for (auto& n : out.nodes) n.code.reset();
  out[out.root()].code = root;
  for (int i = out.root(); i >= 0; --i) {
    auto& n = out[i];
    const Vector code = *n.code;
    switch (n.type) {
      case NodeType::leaf:
        n.box = model.decode_leaf(code);
        break;
      case NodeType::adjacency: {
        auto [l, r] = model.decode_adj(code);
        out[n.left].code = std::move(l);
        out[n.right].code = std::move(r);
        break;
      }
      case NodeType::symmetry: {
        auto [c, p] = model.decode_sym(code);
        n.sym = vec_to_sym(p);
        out[n.left].code = std::move(c);
        break;
      }
    }
  }
  return out;
}

Hierarchy decode_free(const RvnnModel& model, const Vector& root, const DecodeCaps& caps) {
  Hierarchy out;
  int leaves = 0;
  std::function<int(const Vector&, int)> dec = [&](const Vector& code, int depth) {
    if (depth > caps.max_depth) {
      throw DecodeCapError("free decoding exceeded the depth cap of " + std::to_string(caps.max_depth), true);
    }
    const Eigen::Vector3d p = model.classify_node(code);
    int cls = 0;
    p.maxCoeff(&cls);
    int idx = -1;
    switch (static_cast<NodeType>(cls)) {
      case NodeType::leaf:
        if (++leaves > caps.max_leaves) {
          throw DecodeCapError("free decoding exceeded the leaf cap of " + std::to_string(caps.max_leaves), false);
        }
        idx = out.add_leaf(-1, model.decode_leaf(code));
        break;
      case NodeType::adjacency: {
        const auto [l, r] = model.decode_adj(code);
        const int li = dec(l, depth + 1);
        const int ri = dec(r, depth + 1);
        idx = out.add_adjacency(li, ri);
        break;
      }
      case NodeType::symmetry: {
        const auto [c, s] = model.decode_sym(code);
        const int ci = dec(c, depth + 1);
        idx = out.add_symmetry(ci, vec_to_sym(s));
        break;
      }
    }
    out[idx].code = code;
    return idx;
  };
  dec(root, 0);
  return out;
}

FreeDecodeResult try_decode_free(const RvnnModel& model, const Vector& root, const DecodeCaps& caps) {
  try {
    return {decode_free(model, root, caps), ""};
  } catch (const DecodeCapError& e) {
    return {std::nullopt, e.what()};
  }
}

Hierarchy decode_shape(const RvnnModel& model, const Vector& root, const Hierarchy* known, const DecodeCaps& caps) {
  if (root.size() != model.n()) {
    throw ShapeError("root code has " + std::to_string(root.size()) + " entries, expected " + std::to_string(model.n()));
  }
  return known ? decode_known(model, root, *known) : decode_free(model, root, caps);
}

namespace {

Var constant_rows(Graph& g, const std::vector<Vector>& rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return g.constant(std::move(m));
}

// Constant rows, some of which are replaced by graph rows.
Var mixed_rows(Graph& g, const std::vector<Vector>& rows, const std::vector<std::optional<RowRef>>& overrides) {
  const Var c = constant_rows(g, rows);
  if (std::none_of(overrides.begin(), overrides.end(), [](const auto& o) { return o.has_value(); })) return c;
  std::vector<RowRef> refs;
  for (std::size_t i = 0; i < rows.size(); ++i) refs.push_back(overrides[i] ? *overrides[i] : RowRef{c, int(i)});
  return g.gather_rows(refs);
}

}  // namespace

BatchEncoding encode_batch(Graph& g, const RvnnModel& model, std::span<const Hierarchy* const> trees,
                           const EncoderInputs* inputs) {
  BatchEncoding enc;
  enc.codes.resize(trees.size());
  std::map<int, std::vector<std::pair<int, int>>> levels;
  for (std::size_t t = 0; t < trees.size(); ++t) {
    const auto heights = trees[t]->heights();
    enc.codes[t].resize(trees[t]->nodes.size());
    for (std::size_t i = 0; i < heights.size(); ++i) levels[heights[i]].emplace_back(int(t), int(i));
  }
  auto override_of = [&](bool box, int t, int i) -> std::optional<RowRef> {
    if (!inputs) return std::nullopt;
    const auto& table = box ? inputs->boxes : inputs->symmetries;
    if (t >= int(table.size()) || i >= int(table[t].size())) return std::nullopt;
    return table[t][i];
  };
  for (const auto& [height, items] : levels) {
    std::vector<std::pair<int, int>> leaf, adj, sym;
    for (const auto& [t, i] : items) {
      switch ((*trees[t])[i].type) {
        case NodeType::leaf:
          leaf.emplace_back(t, i);
          break;
        case NodeType::adjacency:
          adj.emplace_back(t, i);
          break;
        case NodeType::symmetry:
          sym.emplace_back(t, i);
          break;
      }
    }
    if (!leaf.empty()) {
      std::vector<Vector> rows;
      std::vector<std::optional<RowRef>> over;
      for (const auto& [t, i] : leaf) {
        rows.push_back(box_to_net((*trees[t])[i].box));
        over.push_back(override_of(true, t, i));
      }
      const Var e = model.leaf_encoder(g, mixed_rows(g, rows, over));
      for (std::size_t r = 0; r < leaf.size(); ++r) enc.codes[leaf[r].first][leaf[r].second] = {e, int(r)};
    }
    if (!adj.empty()) {
      std::vector<RowRef> l, r;
      for (const auto& [t, i] : adj) {
        l.push_back(enc.codes[t][(*trees[t])[i].left]);
        r.push_back(enc.codes[t][(*trees[t])[i].right]);
      }
      const Var e = model.adj_encoder(g, g.gather_rows(l), g.gather_rows(r));
      for (std::size_t k = 0; k < adj.size(); ++k) enc.codes[adj[k].first][adj[k].second] = {e, int(k)};
    }
    if (!sym.empty()) {
      std::vector<RowRef> c;
      std::vector<Vector> rows;
      std::vector<std::optional<RowRef>> over;
      for (const auto& [t, i] : sym) {
        c.push_back(enc.codes[t][(*trees[t])[i].left]);
        rows.push_back(sym_to_net((*trees[t])[i].sym));
        over.push_back(override_of(false, t, i));
      }
      const Var e = model.sym_encoder(g, g.gather_rows(c), mixed_rows(g, rows, over));
      for (std::size_t k = 0; k < sym.size(); ++k) enc.codes[sym[k].first][sym[k].second] = {e, int(k)};
    }
  }
  return enc;
}

BatchDecoding decode_batch(Graph& g, const RvnnModel& model, std::span<const Hierarchy* const> trees,
                           const std::vector<DecodeJob>& jobs) {
  BatchDecoding dec;
  std::vector<DecodedNode> frontier;
  for (std::size_t j = 0; j < jobs.size(); ++j) frontier.push_back({int(j), jobs[j].tree, jobs[j].node, jobs[j].code});
  const int n = model.n();
  while (!frontier.empty()) {
    dec.codes.insert(dec.codes.end(), frontier.begin(), frontier.end());
    std::vector<DecodedNode> leaf, adj, sym, next;
    for (const auto& f : frontier) {
      switch ((*trees[f.tree])[f.node].type) {
        case NodeType::leaf:
          leaf.push_back(f);
          break;
        case NodeType::adjacency:
          adj.push_back(f);
          break;
        case NodeType::symmetry:
          sym.push_back(f);
          break;
      }
    }
    auto gather = [&](const std::vector<DecodedNode>& v) {
      std::vector<RowRef> refs;
      for (const auto& f : v) refs.push_back(f.value);
      return g.gather_rows(refs);
    };
    if (!leaf.empty()) {
      const Var b = model.leaf_decoder(g, gather(leaf));
      for (std::size_t k = 0; k < leaf.size(); ++k) dec.boxes.push_back({leaf[k].job, leaf[k].tree, leaf[k].node, {b, int(k)}});
    }
    if (!adj.empty()) {
      const Var d = model.adj_decoder(g, gather(adj));
      const Var l = g.slice(d, 0, n), r = g.slice(d, n, n);
      for (std::size_t k = 0; k < adj.size(); ++k) {
        const auto& node = (*trees[adj[k].tree])[adj[k].node];
        next.push_back({adj[k].job, adj[k].tree, node.left, {l, int(k)}});
        next.push_back({adj[k].job, adj[k].tree, node.right, {r, int(k)}});
      }
    }
    if (!sym.empty()) {
      const Var d = model.sym_decoder(g, gather(sym));
      const Var c = g.slice(d, 0, n), p = g.slice(d, n, kSymmetryVectorSize);
      for (std::size_t k = 0; k < sym.size(); ++k) {
        const auto& node = (*trees[sym[k].tree])[sym[k].node];
        dec.symmetries.push_back({sym[k].job, sym[k].tree, sym[k].node, {p, int(k)}});
        next.push_back({sym[k].job, sym[k].tree, node.left, {c, int(k)}});
      }
    }
    frontier = std::move(next);
  }
  return dec;
}

LossTerms reconstruction_loss(Graph& g, const RvnnModel& model, std::span<const Hierarchy* const> trees,
                              const LossOptions& options) {
  if (trees.empty()) throw std::invalid_argument("reconstruction loss of zero trees");
  const BatchEncoding enc = encode_batch(g, model, trees);
  std::vector<DecodeJob> jobs;
  for (std::size_t t = 0; t < trees.size(); ++t) {
    const Hierarchy& h = *trees[t];
    if (options.subtree) {
      for (int i = 0; i <= h.root(); ++i) {
        if (h[i].type != NodeType::leaf || i == h.root()) jobs.push_back({int(t), i, enc.codes[t][i]});
      }
    } else {
      jobs.push_back({int(t), h.root(), enc.codes[t][h.root()]});
    }
  }
  const BatchDecoding dec = decode_batch(g, model, trees, jobs);

  LossTerms out;
  {
    std::vector<RowRef> refs;
    std::vector<Vector> targets;
    for (const auto& d : dec.boxes) {
      refs.push_back(d.value);
      targets.push_back(box_to_net((*trees[d.tree])[d.node].box));
    }
    out.box = g.squared_error(g.gather_rows(refs), constant_rows(g, targets));
  }
  if (options.symmetry_term && !dec.symmetries.empty()) {
    std::vector<RowRef> refs;
    std::vector<Vector> targets;
    for (const auto& d : dec.symmetries) {
      refs.push_back(d.value);
      targets.push_back(sym_to_net((*trees[d.tree])[d.node].sym));
    }
    out.symmetry = g.squared_error(g.gather_rows(refs), constant_rows(g, targets));
  } else {
    out.symmetry = g.constant(Matrix::Zero(1, 1));
  }
  {
    std::vector<RowRef> refs;
    std::vector<int> labels;
    for (const auto& d : dec.codes) {
      refs.push_back(d.value);
      labels.push_back(node_class((*trees[d.tree])[d.node].type));
    }
    for (std::size_t t = 0; t < trees.size(); ++t) {
      for (int i = 0; i <= trees[t]->root(); ++i) {
        refs.push_back(enc.codes[t][i]);
        labels.push_back(node_class((*trees[t])[i].type));
      }
    }
    out.classifier = g.softmax_cross_entropy(model.classifier_logits(g, g.gather_rows(refs)), labels);
  }
  const double inv = 1.0 / static_cast<double>(trees.size());
  out.box = g.affine(out.box, inv);
  out.symmetry = g.affine(out.symmetry, inv);
  out.classifier = g.affine(out.classifier, inv);
  out.total = g.add(g.add(out.box, out.symmetry), g.affine(out.classifier, options.lambda));
  return out;
}

double reconstruction_loss(const RvnnModel& model, const Hierarchy& h, const LossOptions& options) {
  Graph g(&model.store());
  const Hierarchy* trees[] = {&h};
  const LossTerms t = reconstruction_loss(g, model, trees, options);
  return g.forward(t.total)(0, 0);
}

SubtreeError subtree_error(const RvnnModel& model, const Vector& code, const Hierarchy& subtree) {
  Hierarchy d = decode_known(model, code, subtree);
  // Fold errors are judged separately; keep the image count comparable.
  for (int i = 0; i <= subtree.root(); ++i) {
    if (subtree[i].type == NodeType::symmetry) d[i].sym.fold = subtree[i].sym.fold;
  }
  const auto a = expand_boxes(subtree), b = expand_boxes(d);
  SubtreeError e;
  for (std::size_t i = 0; i < a.size(); ++i) e.sum += (obb_to_vec(a[i]) - obb_to_vec(b[i])).squaredNorm();
  e.boxes = static_cast<int>(a.size());
  return e;
}

double reconstruction_error(const RvnnModel& model, const Hierarchy& h) {
  return subtree_error(model, encode_root(model, h), h).mean();
}

}  // namespace grass
