#pragma once

#include "grass/data/fixtures.hpp"
#include "grass/rvnn/infer.hpp"

#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace grass {

// Mean of the node codes of the tree, or of the subtree rooted at `subtree`.
// Throws std::invalid_argument when a node has no code.
Vector avg_code_feature(const Hierarchy& h, int subtree = -1);

// Inferred hierarchy of every graph with codes from encoding it; graphs are
// split across `threads` workers.
std::vector<Hierarchy> encode_corpus(const RvnnModel& model, std::span<const PartGraph> graphs, int threads = 1,
                                     const InferOptions& options = {});

struct PrPoint {
  double threshold = 0.0;
  double precision = 1.0;
  double recall = 0.0;
};

struct ClassificationResult {
  std::vector<std::string> classes;
  // Leave-one-out nearest-neighbour label per sample.
  std::vector<std::string> predicted;
  double accuracy = 0.0;
  // Per class, pooled over its queries, one point per distinct distance.
  std::map<std::string, std::vector<PrPoint>> curves;

  Json to_json() const;
};

// Leave-one-out retrieval by L2 distance. Each query ranks the remaining
// samples; those within the threshold are retrieved and those of the query's
// class are relevant. Nearest-neighbour ties go to the lower index. Throws
// std::invalid_argument unless there are at least two classes.
ClassificationResult classify_and_pr(std::span<const Vector> features, std::span<const std::string> labels);

// class,threshold,precision,recall
void write_pr_csv(const std::filesystem::path& path, const ClassificationResult& r);
void write_pr_svg(const std::filesystem::path& path, const ClassificationResult& r);

struct LabeledHierarchy {
  Hierarchy hierarchy;
  // Part id to semantic label; every part the tree covers needs one.
  std::map<int, std::string> labels;
};

LabeledHierarchy label_hierarchy(const Hierarchy& h, const PartGraph& g);

// h(p, l) for every part p of the tree: edges from p up to its first ancestor
// that also covers a different part labeled l; 0 for p's own label. Symmetry
// images hang one edge below their symmetry node. Missing labels throw
// std::invalid_argument.
std::map<int, std::map<std::string, int>> merge_distances(const LabeledHierarchy& s);

struct TripleConsistency {
  std::string label;
  std::string first;
  std::string second;
  // P(first before second) and P(second before first) among parts of
  // `label` in shapes carrying all three labels.
  double p_forward = 0.0;
  double p_backward = 0.0;
  int parts = 0;
  // Mean of the two binary entropies.
  double entropy = 0.0;
};

struct ConsistencyReport {
  double value = 0.0;
  std::vector<TripleConsistency> triples;
  Json to_json() const;
};

// One minus the mean base-2 binary entropy over every label l with an
// unordered pair {l1, l2} of other labels that co-occur in some shape.
// Throws std::invalid_argument when there is no such triple.
ConsistencyReport consistency_metric(std::span<const LabeledHierarchy> shapes);

// Labels a, b, c. Consistent: every shape merges a with b first. Coin flip:
// ((a,b),(a,c)), ((b,a),(b,c)), ((c,a),(c,b)), so every P is one half.
std::vector<LabeledHierarchy> consistency_fixture(bool coin_flip);

struct SubtreeMatch {
  int shape = 0;
  int node = 0;
  double distance = 0.0;
};

// Every subtree of every shape ranked by L2 distance between its mean code
// and `query`; ties by (shape, node). Returns the first `top_k`.
std::vector<SubtreeMatch> partial_match(const Vector& query, std::span<const Hierarchy> corpus, int top_k);

// The label shared by every part under `node`, or "" when they differ.
std::string subtree_label(const LabeledHierarchy& s, int node);
// Node of the largest subtree whose parts all carry `label`; -1 if none.
int largest_labeled_subtree(const LabeledHierarchy& s, const std::string& label);

struct RuleRow {
  std::string rule;
  std::string expectation;
  std::vector<std::set<int>> expected;
  std::vector<int> first_merge;
  bool agrees = false;
};

struct RuleReport {
  std::vector<RuleRow> rows;
  int agreement() const;
  Json to_json() const;
  std::string to_text() const;
};

// Parses every fixture and compares the part set of its first committed merge
// with the expected ones.
RuleReport rule_fixture_report(std::span<const RuleFixture> fixtures, const RvnnModel& model,
                               const InferOptions& options = {});

}  // namespace grass
