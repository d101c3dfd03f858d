#pragma once

#include "grass/core/parameter_store.hpp"
#include "grass/core/tensor.hpp"

#include <functional>
#include <string>
#include <vector>

namespace grass {

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// One row of a node's value; the unit of gather operations.
struct RowRef {
  Var var;
  int row = 0;
};

class GraphError : public std::runtime_error {
 public:
  GraphError(int node, std::string op, const std::string& what)
      : std::runtime_error("node #" + std::to_string(node) + " (" + op + "): " + what),
        node_(node),
        op_(std::move(op)) {}
  int node() const { return node_; }
  const std::string& op() const { return op_; }

 private:
  int node_;
  std::string op_;
};

// Dynamically built computation graph with reverse-mode differentiation.
//
// Nodes are appended in construction order, which is also the topological
// order. Values are computed lazily by forward(); backward() walks the tape
// in reverse and returns gradients for every reachable parameter.
class Graph {
 public:
  using ForwardFn = std::function<Matrix(const Graph&)>;
  using BackwardFn = std::function<void(Graph&)>;

  explicit Graph(const ParameterStore* store = nullptr) : store_(store) {}

  Var constant(Matrix value);
  Var constant(const Tensor& value) { return constant(value.matrix()); }
  Var parameter(const std::string& name);

  Var matmul(Var a, Var b);
  // x * w^T, the layout of a dense layer with w stored as (out, in).
  Var matmul_nt(Var x, Var w);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  // Adds a 1 x c row to every row of x.
  Var add_row(Var x, Var row);
  Var affine(Var x, double scale, double shift = 0.0);
  Var tanh(Var x);
  Var sigmoid(Var x);
  Var exp(Var x);
  Var log(Var x);
  Var softmax(Var logits);
  Var concat(const std::vector<Var>& parts);
  Var slice(Var x, int col_begin, int cols);
  Var gather_rows(const std::vector<RowRef>& rows);
  Var sum(Var x);
  Var mean(Var x);
  Var squared_error(Var pred, Var target);
  // Sum over rows of weight_i * -log softmax(logits_i)[label_i].
  Var softmax_cross_entropy(Var logits, std::vector<int> labels, std::vector<double> weights = {});
  // Sum over elements of the logistic loss against targets in [0, 1].
  Var sigmoid_cross_entropy(Var logits, Var targets);

  // Dense layer: x * W^T + b with parameters looked up by name.
  Var linear(Var x, const std::string& weight, const std::string& bias);

  // Escape hatch for ops defined outside the graph (tests use it for a
  // deliberately wrong gradient).
  Var custom(std::string op, std::vector<Var> inputs, ForwardFn forward, BackwardFn backward);

  const Matrix& forward(Var out);
  GradientMap backward(Var out);
  // Forgets cached values so the next forward re-reads parameters.
  void invalidate() { evaluated_ = 0; }

  const Matrix& value(Var v) const;
  bool evaluated(Var v) const { return v.id >= 0 && v.id < evaluated_; }
  std::size_t size() const { return nodes_.size(); }
  const std::string& op_name(Var v) const { return nodes_.at(v.id).op; }

  // Used inside backward functions.
  const Matrix& out_grad(int node) const { return grads_[node]; }
  bool needs_grad(Var v) const { return nodes_[v.id].requires_grad; }
  Matrix& grad_accumulator(Var v);
  int current_node() const { return current_; }

 private:
  struct Node {
    std::string op;
    std::vector<Var> inputs;
    ForwardFn forward;
    BackwardFn backward;
    Matrix value;
    const Matrix* external = nullptr;
    std::string param;
    bool requires_grad = false;
  };

  Var push(std::string op, std::vector<Var> inputs, ForwardFn forward, BackwardFn backward);
  void check_var(Var v) const;

  const ParameterStore* store_;
  std::vector<Node> nodes_;
  std::vector<Matrix> grads_;
  std::map<std::string, Var> param_nodes_;
  int evaluated_ = 0;
  int current_ = -1;
};

}  // namespace grass
