#pragma once

#include "grass/rvnn/codec.hpp"
#include "grass/sampler/sampler.hpp"

namespace grass {

struct InferOptions {
  // Without lookahead each merge is scored on its own.
  bool lookahead = true;
};

// Greedy bottom-up parse. Every current node carries the squared box error of
// encoding and decoding its subtree. A merge is scored by how much it changes
// the sum of those errors: the new node's error minus the errors of the nodes
// it replaces. Each step scores every legal (first, second) merge pair by the
// sum of both changes and commits the first merge of the best pair. Ties go
// to the lowest candidate index.
// `merges`, when given, receives the part ids covered by each committed merge
// in order.
Hierarchy infer_hierarchy(const PartGraph& g, const RvnnModel& model, const InferOptions& options = {},
                          std::vector<std::vector<int>>* merges = nullptr);

}  // namespace grass
