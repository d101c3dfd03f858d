#include "grass/core/graph.hpp"

#include <algorithm>
#include <cmath>

namespace grass {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(what) + ": shapes [" + std::to_string(a.rows()) + "," +
                     std::to_string(a.cols()) + "] and [" + std::to_string(b.rows()) + "," +
                     std::to_string(b.cols()) + "] differ");
  }
}

Matrix scalar_matrix(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return m;
}

Matrix row_softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - mx).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

}  // namespace

void Graph::check_var(Var v) const {
  if (v.id < 0 || v.id >= static_cast<int>(nodes_.size())) {
    throw std::invalid_argument("variable does not belong to this graph");
  }
}

Var Graph::push(std::string op, std::vector<Var> inputs, ForwardFn forward, BackwardFn backward) {
  Node n;
  n.op = std::move(op);
  for (Var v : inputs) {
    check_var(v);
    n.requires_grad = n.requires_grad || nodes_[v.id].requires_grad;
  }
  n.inputs = std::move(inputs);
  n.forward = std::move(forward);
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Graph::constant(Matrix value) {
  Node n;
  n.op = "constant";
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Graph::parameter(const std::string& name) {
  if (auto it = param_nodes_.find(name); it != param_nodes_.end()) return it->second;
  if (!store_ || !store_->contains(name)) {
    throw std::invalid_argument("graph has no parameter named " + name);
  }
  Node n;
  n.op = "parameter";
  n.param = name;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  Var v{static_cast<int>(nodes_.size()) - 1};
  param_nodes_[name] = v;
  return v;
}

const Matrix& Graph::value(Var v) const {
  check_var(v);
  if (!evaluated(v)) {
    throw GraphError(v.id, nodes_[v.id].op, "value requested before forward");
  }
  const Node& n = nodes_[v.id];
  return n.external ? *n.external : n.value;
}

Matrix& Graph::grad_accumulator(Var v) {
  Matrix& g = grads_[v.id];
  if (g.size() == 0) {
    const Matrix& val = value(v);
    g = Matrix::Zero(val.rows(), val.cols());
  }
  return g;
}

const Matrix& Graph::forward(Var out) {
  check_var(out);
  for (int i = evaluated_; i <= out.id; ++i) {
    Node& n = nodes_[i];
    try {
      if (n.op == "parameter") {
        n.external = &store_->value(n.param).matrix();
      } else if (n.forward) {
        n.value = n.forward(*this);
      }
    } catch (const GraphError&) {
      throw;
    } catch (const std::exception& e) {
      throw GraphError(i, n.op, e.what());
    }
    evaluated_ = i + 1;
  }
  return value(out);
}

GradientMap Graph::backward(Var out) {
  check_var(out);
  if (!evaluated(out)) {
    throw GraphError(out.id, nodes_[out.id].op, "backward called before forward");
  }
  const Matrix& ov = value(out);
  if (ov.size() != 1) {
    throw GraphError(out.id, nodes_[out.id].op, "backward requires a scalar output");
  }
  grads_.assign(nodes_.size(), Matrix());
  grads_[out.id] = Matrix::Ones(1, 1);
  GradientMap result;
  for (int i = out.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (grads_[i].size() == 0 || !n.requires_grad) continue;
    if (n.op == "parameter") {
      result[n.param] = grads_[i];
      continue;
    }
    if (n.backward) {
      current_ = i;
      n.backward(*this);
    }
  }
  current_ = -1;
  grads_.clear();
  return result;
}

Var Graph::matmul(Var a, Var b) {
  return push(
      "matmul", {a, b},
      [a, b](const Graph& g) -> Matrix {
        const Matrix& x = g.value(a);
        const Matrix& y = g.value(b);
        if (x.cols() != y.rows()) throw ShapeError("inner dimensions differ");
        return x * y;
      },
      [a, b](Graph& g) {
        const Matrix& G = g.out_grad(g.current_node());
        if (g.needs_grad(a)) g.grad_accumulator(a).noalias() += G * g.value(b).transpose();
        if (g.needs_grad(b)) g.grad_accumulator(b).noalias() += g.value(a).transpose() * G;
      });
}

Var Graph::matmul_nt(Var x, Var w) {
  return push(
      "matmul_nt", {x, w},
      [x, w](const Graph& g) -> Matrix {
        const Matrix& X = g.value(x);
        const Matrix& W = g.value(w);
        if (X.cols() != W.cols()) {
          throw ShapeError("input width " + std::to_string(X.cols()) + " does not match weight width " +
                           std::to_string(W.cols()));
        }
        Matrix out(X.rows(), W.rows());
        out.noalias() = X * W.transpose();
        return out;
      },
      [x, w](Graph& g) {
        const Matrix& G = g.out_grad(g.current_node());
        if (g.needs_grad(x)) g.grad_accumulator(x).noalias() += G * g.value(w);
        if (g.needs_grad(w)) g.grad_accumulator(w).noalias() += G.transpose() * g.value(x);
      });
}

Var Graph::add(Var a, Var b) {
  return push(
      "add", {a, b},
      [a, b](const Graph& g) -> Matrix {
        require_same_shape(g.value(a), g.value(b), "add");
        return g.value(a) + g.value(b);
      },
      [a, b](Graph& g) {
        const Matrix& G = g.out_grad(g.current_node());
        if (g.needs_grad(a)) g.grad_accumulator(a) += G;
        if (g.needs_grad(b)) g.grad_accumulator(b) += G;
      });
}

Var Graph::sub(Var a, Var b) {
  return push(
      "sub", {a, b},
      [a, b](const Graph& g) -> Matrix {
        require_same_shape(g.value(a), g.value(b), "sub");
        return g.value(a) - g.value(b);
      },
      [a, b](Graph& g) {
        const Matrix& G = g.out_grad(g.current_node());
        if (g.needs_grad(a)) g.grad_accumulator(a) += G;
        if (g.needs_grad(b)) g.grad_accumulator(b) -= G;
      });
}

Var Graph::mul(Var a, Var b) {
  return push(
      "mul", {a, b},
      [a, b](const Graph& g) -> Matrix {
        require_same_shape(g.value(a), g.value(b), "mul");
        return g.value(a).cwiseProduct(g.value(b));
      },
      [a, b](Graph& g) {
        const Matrix& G = g.out_grad(g.current_node());
        if (g.needs_grad(a)) g.grad_accumulator(a) += G.cwiseProduct(g.value(b));
        if (g.needs_grad(b)) g.grad_accumulator(b) += G.cwiseProduct(g.value(a));
      });
}

Var Graph::add_row(Var x, Var row) {
  return push(
      "add_row", {x, row},
      [x, row](const Graph& g) -> Matrix {
        const Matrix& X = g.value(x);
        const Matrix& r = g.value(row);
        if (r.rows() != 1 || r.cols() != X.cols()) {
          throw ShapeError("bias of width " + std::to_string(r.cols()) + " cannot broadcast to width " +
                           std::to_string(X.cols()));
        }
        Matrix out = X;
        out.rowwise() += r.row(0);
        return out;
      },
      [x, row](Graph& g) {
        const Matrix& G = g.out_grad(g.current_node());
        if (g.needs_grad(x)) g.grad_accumulator(x) += G;
        if (g.needs_grad(row)) g.grad_accumulator(row) += G.colwise().sum();
      });
}

Var Graph::affine(Var x, double scale, double shift) {
  return push(
      "affine", {x},
      [x, scale, shift](const Graph& g) -> Matrix {
        return (g.value(x).array() * scale + shift).matrix();
      },
      [x, scale](Graph& g) { g.grad_accumulator(x) += scale * g.out_grad(g.current_node()); });
}

Var Graph::tanh(Var x) {
  return push(
      "tanh", {x}, [x](const Graph& g) -> Matrix { return g.value(x).array().tanh().matrix(); },
      [x](Graph& g) {
        const int self = g.current_node();
        const Matrix& y = g.value(Var{self});
        g.grad_accumulator(x).array() += g.out_grad(self).array() * (1.0 - y.array().square());
      });
}

Var Graph::sigmoid(Var x) {
  return push(
      "sigmoid", {x},
      [x](const Graph& g) -> Matrix {
        return (1.0 / (1.0 + (-g.value(x).array()).exp())).matrix();
      },
      [x](Graph& g) {
        const int self = g.current_node();
        const Matrix& y = g.value(Var{self});
        g.grad_accumulator(x).array() += g.out_grad(self).array() * y.array() * (1.0 - y.array());
      });
}

Var Graph::exp(Var x) {
  return push(
      "exp", {x}, [x](const Graph& g) -> Matrix { return g.value(x).array().exp().matrix(); },
      [x](Graph& g) {
        const int self = g.current_node();
        g.grad_accumulator(x).array() += g.out_grad(self).array() * g.value(Var{self}).array();
      });
}

Var Graph::log(Var x) {
  return push(
      "log", {x},
      [x](const Graph& g) -> Matrix {
        if ((g.value(x).array() <= 0.0).any()) throw ShapeError("log of non-positive value");
        return g.value(x).array().log().matrix();
      },
      [x](Graph& g) {
        g.grad_accumulator(x).array() += g.out_grad(g.current_node()).array() / g.value(x).array();
      });
}

Var Graph::softmax(Var logits) {
  return push(
      "softmax", {logits}, [logits](const Graph& g) -> Matrix { return row_softmax(g.value(logits)); },
      [logits](Graph& g) {
        const int self = g.current_node();
        const Matrix& y = g.value(Var{self});
        const Matrix& G = g.out_grad(self);
        Matrix& acc = g.grad_accumulator(logits);
        for (Eigen::Index r = 0; r < y.rows(); ++r) {
          const double dot = G.row(r).dot(y.row(r));
          acc.row(r).array() += y.row(r).array() * (G.row(r).array() - dot);
        }
      });
}

Var Graph::concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat of zero tensors");
  return push(
      "concat", parts,
      [parts](const Graph& g) -> Matrix {
        const Eigen::Index rows = g.value(parts[0]).rows();
        Eigen::Index cols = 0;
        for (Var p : parts) {
          if (g.value(p).rows() != rows) throw ShapeError("concat inputs have different row counts");
          cols += g.value(p).cols();
        }
        Matrix out(rows, cols);
        Eigen::Index c = 0;
        for (Var p : parts) {
          const Matrix& v = g.value(p);
          out.middleCols(c, v.cols()) = v;
          c += v.cols();
        }
        return out;
      },
      [parts](Graph& g) {
        const Matrix& G = g.out_grad(g.current_node());
        Eigen::Index c = 0;
        for (Var p : parts) {
          const Eigen::Index w = g.value(p).cols();
          if (g.needs_grad(p)) g.grad_accumulator(p) += G.middleCols(c, w);
          c += w;
        }
      });
}

Var Graph::slice(Var x, int col_begin, int cols) {
  return push(
      "slice", {x},
      [x, col_begin, cols](const Graph& g) -> Matrix {
        const Matrix& X = g.value(x);
        if (col_begin < 0 || cols <= 0 || col_begin + cols > X.cols()) {
          throw ShapeError("slice [" + std::to_string(col_begin) + "," + std::to_string(col_begin + cols) +
                           ") out of range for width " + std::to_string(X.cols()));
        }
        return X.middleCols(col_begin, cols);
      },
      [x, col_begin, cols](Graph& g) {
        g.grad_accumulator(x).middleCols(col_begin, cols) += g.out_grad(g.current_node());
      });
}

Var Graph::gather_rows(const std::vector<RowRef>& rows) {
  if (rows.empty()) throw std::invalid_argument("gather of zero rows");
  std::vector<Var> inputs;
  for (const RowRef& r : rows) {
    if (inputs.empty() || std::none_of(inputs.begin(), inputs.end(), [&](Var v) { return v.id == r.var.id; })) {
      inputs.push_back(r.var);
    }
  }
  return push(
      "gather_rows", inputs,
      [rows](const Graph& g) -> Matrix {
        const Eigen::Index cols = g.value(rows[0].var).cols();
        Matrix out(static_cast<Eigen::Index>(rows.size()), cols);
        for (std::size_t i = 0; i < rows.size(); ++i) {
          const Matrix& src = g.value(rows[i].var);
          if (src.cols() != cols) throw ShapeError("gathered rows have different widths");
          if (rows[i].row < 0 || rows[i].row >= src.rows()) throw ShapeError("gather row index out of range");
          out.row(static_cast<Eigen::Index>(i)) = src.row(rows[i].row);
        }
        return out;
      },
      [rows](Graph& g) {
        const Matrix& G = g.out_grad(g.current_node());
        for (std::size_t i = 0; i < rows.size(); ++i) {
          if (!g.needs_grad(rows[i].var)) continue;
          g.grad_accumulator(rows[i].var).row(rows[i].row) += G.row(static_cast<Eigen::Index>(i));
        }
      });
}

Var Graph::sum(Var x) {
  return push(
      "sum", {x}, [x](const Graph& g) -> Matrix { return scalar_matrix(g.value(x).sum()); },
      [x](Graph& g) { g.grad_accumulator(x).array() += g.out_grad(g.current_node())(0, 0); });
}

Var Graph::mean(Var x) {
  return push(
      "mean", {x}, [x](const Graph& g) -> Matrix { return scalar_matrix(g.value(x).mean()); },
      [x](Graph& g) {
        const double n = static_cast<double>(g.value(x).size());
        g.grad_accumulator(x).array() += g.out_grad(g.current_node())(0, 0) / n;
      });
}

Var Graph::squared_error(Var pred, Var target) {
  return push(
      "squared_error", {pred, target},
      [pred, target](const Graph& g) -> Matrix {
        require_same_shape(g.value(pred), g.value(target), "squared_error");
        return scalar_matrix((g.value(pred) - g.value(target)).squaredNorm());
      },
      [pred, target](Graph& g) {
        const double s = g.out_grad(g.current_node())(0, 0);
        const Matrix diff = g.value(pred) - g.value(target);
        if (g.needs_grad(pred)) g.grad_accumulator(pred) += 2.0 * s * diff;
        if (g.needs_grad(target)) g.grad_accumulator(target) -= 2.0 * s * diff;
      });
}

Var Graph::softmax_cross_entropy(Var logits, std::vector<int> labels, std::vector<double> weights) {
  if (weights.empty()) weights.assign(labels.size(), 1.0);
  if (weights.size() != labels.size()) throw std::invalid_argument("weights and labels differ in length");
  return push(
      "softmax_cross_entropy", {logits},
      [logits, labels, weights](const Graph& g) -> Matrix {
        const Matrix& L = g.value(logits);
        if (static_cast<std::size_t>(L.rows()) != labels.size()) {
          throw ShapeError("label count " + std::to_string(labels.size()) + " does not match " +
                           std::to_string(L.rows()) + " rows");
        }
        double total = 0.0;
        for (Eigen::Index r = 0; r < L.rows(); ++r) {
          const int y = labels[r];
          if (y < 0 || y >= L.cols()) throw ShapeError("label out of range");
          const double mx = L.row(r).maxCoeff();
          const double lse = mx + std::log((L.row(r).array() - mx).exp().sum());
          total += weights[r] * (lse - L(r, y));
        }
        return scalar_matrix(total);
      },
      [logits, labels, weights](Graph& g) {
        const double s = g.out_grad(g.current_node())(0, 0);
        Matrix p = row_softmax(g.value(logits));
        for (Eigen::Index r = 0; r < p.rows(); ++r) {
          p(r, labels[r]) -= 1.0;
          p.row(r) *= weights[r] * s;
        }
        g.grad_accumulator(logits) += p;
      });
}

Var Graph::sigmoid_cross_entropy(Var logits, Var targets) {
  return push(
      "sigmoid_cross_entropy", {logits, targets},
      [logits, targets](const Graph& g) -> Matrix {
        const Matrix& X = g.value(logits);
        const Matrix& T = g.value(targets);
        require_same_shape(X, T, "sigmoid_cross_entropy");
        const auto x = X.array();
        return scalar_matrix(
            (x.max(0.0) - x * T.array() + (1.0 + (-x.abs()).exp()).log()).sum());
      },
      [logits, targets](Graph& g) {
        const double s = g.out_grad(g.current_node())(0, 0);
        const Matrix& X = g.value(logits);
        const Matrix sig = (1.0 / (1.0 + (-X.array()).exp())).matrix();
        if (g.needs_grad(logits)) g.grad_accumulator(logits) += s * (sig - g.value(targets));
        if (g.needs_grad(targets)) g.grad_accumulator(targets) -= s * X;
      });
}

Var Graph::linear(Var x, const std::string& weight, const std::string& bias) {
  return add_row(matmul_nt(x, parameter(weight)), parameter(bias));
}

Var Graph::custom(std::string op, std::vector<Var> inputs, ForwardFn forward, BackwardFn backward) {
  return push(std::move(op), std::move(inputs), std::move(forward), std::move(backward));
}

}  // namespace grass
