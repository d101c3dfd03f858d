#pragma once

#include "grass/rvnn/model.hpp"
#include "grass/shape/hierarchy.hpp"

#include <optional>
#include <span>
#include <string>

namespace grass {

// Bottom-up encoding; every node gets its code and the root code is
// `result[result.root()].code`.
Hierarchy encode_shape(const RvnnModel& model, const Hierarchy& h);
Vector encode_root(const RvnnModel& model, const Hierarchy& h);

struct DecodeCaps {
  int max_depth = 16;
  int max_leaves = 64;
};

class DecodeCapError : public std::runtime_error {
 public:
  DecodeCapError(const std::string& what, bool depth) : std::runtime_error(what), depth_(depth) {}
  bool depth_exceeded() const { return depth_; }

 private:
  bool depth_;
};

// Known mode: follows `known`'s topology and copies its part ids; boxes and
// symmetry specs come from the decoders. Every node carries its decoded code.
Hierarchy decode_known(const RvnnModel& model, const Vector& root, const Hierarchy& known);
// Free mode: the classifier picks the decoder at every node. Leaves get
// part id -1. Throws DecodeCapError when a cap is exceeded.
Hierarchy decode_free(const RvnnModel& model, const Vector& root, const DecodeCaps& caps = {});

struct FreeDecodeResult {
  std::optional<Hierarchy> hierarchy;
  std::string error;
  bool ok() const { return hierarchy.has_value(); }
};
FreeDecodeResult try_decode_free(const RvnnModel& model, const Vector& root, const DecodeCaps& caps = {});

Hierarchy decode_shape(const RvnnModel& model, const Vector& root, const Hierarchy* known = nullptr,
                       const DecodeCaps& caps = {});

// Per-tree per-node code rows inside a graph.
struct BatchEncoding {
  std::vector<std::vector<RowRef>> codes;
};

// Optional graph inputs that replace the constant leaf boxes and symmetry
// vectors (network space) of some nodes; used when encoding decoder output.
struct EncoderInputs {
  std::vector<std::vector<std::optional<RowRef>>> boxes;
  std::vector<std::vector<std::optional<RowRef>>> symmetries;
};

// Level-wise batched encoding of several hierarchies.
BatchEncoding encode_batch(Graph& g, const RvnnModel& model, std::span<const Hierarchy* const> trees,
                           const EncoderInputs* inputs = nullptr);

struct DecodeJob {
  int tree = 0;
  int node = 0;
  RowRef code;
};

struct DecodedNode {
  int job = 0;
  int tree = 0;
  int node = 0;
  RowRef value;
};

struct BatchDecoding {
  // Every node visited, with the code it was decoded from.
  std::vector<DecodedNode> codes;
  // Leaf boxes and symmetry parameters, network space.
  std::vector<DecodedNode> boxes;
  std::vector<DecodedNode> symmetries;
};

// Known-topology decoding of each job's subtree, batched by depth.
BatchDecoding decode_batch(Graph& g, const RvnnModel& model, std::span<const Hierarchy* const> trees,
                           const std::vector<DecodeJob>& jobs);

struct LossOptions {
  // Weight of the node classification cross-entropy.
  double lambda = 0.2;
  // Also decode from every internal node, not only the root.
  bool subtree = true;
  // Squared error on decoded symmetry parameters.
  bool symmetry_term = true;
};

struct LossTerms {
  Var total;
  Var box;
  Var symmetry;
  Var classifier;
};

// Mean over trees of: squared 12-parameter leaf error + squared symmetry
// parameter error + lambda * classifier cross-entropy on every encoded and
// decoded code. Errors are measured in network space.
LossTerms reconstruction_loss(Graph& g, const RvnnModel& model, std::span<const Hierarchy* const> trees,
                              const LossOptions& options = {});
double reconstruction_loss(const RvnnModel& model, const Hierarchy& h, const LossOptions& options = {});

// Sum of squared 12-parameter errors over the expanded boxes of a subtree
// decoded (known topology) from `code`, and the number of boxes.
struct SubtreeError {
  double sum = 0.0;
  int boxes = 0;
  double mean() const { return boxes ? sum / boxes : 0.0; }
};
SubtreeError subtree_error(const RvnnModel& model, const Vector& code, const Hierarchy& subtree);

// Shape-unit error of encode then known-topology decode, over the expanded
// boxes of the whole tree: mean over boxes of the squared 12-parameter error.
double reconstruction_error(const RvnnModel& model, const Hierarchy& h);

}  // namespace grass
