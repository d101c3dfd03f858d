#include "grass/eval/eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

namespace grass {

Vector avg_code_feature(const Hierarchy& h, int subtree) {
  if (h.empty()) throw std::invalid_argument("avg_code_feature: empty hierarchy");
  const int top = subtree < 0 ? h.root() : subtree;
  if (top >= static_cast<int>(h.nodes.size())) throw std::out_of_range("avg_code_feature: bad subtree index");
  Vector sum;
  int count = 0;
  std::vector<int> stack{top};
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    const auto& node = h[i];
    if (!node.code) throw std::invalid_argument("avg_code_feature: node " + std::to_string(i) + " has no code");
    if (count == 0) sum = Vector::Zero(node.code->size());
    sum += *node.code;
    ++count;
    if (node.left >= 0) stack.push_back(node.left);
    if (node.right >= 0) stack.push_back(node.right);
  }
  return sum / static_cast<double>(count);
}

std::vector<Hierarchy> encode_corpus(const RvnnModel& model, std::span<const PartGraph> graphs, int threads,
                                     const InferOptions& options) {
  std::vector<Hierarchy> out(graphs.size());
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(graphs.size())));
  auto run = [&](int w) {
    for (std::size_t i = static_cast<std::size_t>(w); i < graphs.size(); i += static_cast<std::size_t>(workers))
      out[i] = encode_shape(model, infer_hierarchy(graphs[i], model, options));
  };
  if (workers == 1) {
    run(0);
    return out;
  }
  std::vector<std::jthread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        run(w);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  pool.clear();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

ClassificationResult classify_and_pr(std::span<const Vector> features, std::span<const std::string> labels) {
  if (features.size() != labels.size()) throw std::invalid_argument("classify_and_pr: feature/label count mismatch");
  ClassificationResult r;
  r.classes.assign(labels.begin(), labels.end());
  std::sort(r.classes.begin(), r.classes.end());
  r.classes.erase(std::unique(r.classes.begin(), r.classes.end()), r.classes.end());
  if (r.classes.size() < 2) throw std::invalid_argument("classify_and_pr: need at least two classes");

  const std::size_t n = features.size();
  Matrix d(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (features[i] - features[j]).norm();

  int correct = 0;
  r.predicted.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      if (best == n || d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) <
                           d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(best)))
        best = j;
    }
    r.predicted[i] = labels[best];
    correct += r.predicted[i] == labels[i];
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(n);

  for (const auto& c : r.classes) {
    std::vector<std::pair<double, bool>> pairs;
    long relevant = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i] != c) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        pairs.emplace_back(d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), labels[j] == c);
        relevant += labels[j] == c;
      }
    }
    auto& curve = r.curves[c];
    if (relevant == 0) continue;
    std::sort(pairs.begin(), pairs.end());
    long tp = 0;
    long retrieved = 0;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      tp += pairs[k].second;
      ++retrieved;
      if (k + 1 < pairs.size() && pairs[k + 1].first == pairs[k].first) continue;
      curve.push_back({pairs[k].first, static_cast<double>(tp) / static_cast<double>(retrieved),
                       static_cast<double>(tp) / static_cast<double>(relevant)});
    }
  }
  return r;
}

Json ClassificationResult::to_json() const {
  Json j;
  j["accuracy"] = accuracy;
  j["classes"] = classes;
  j["predicted"] = predicted;
  return j;
}

void write_pr_csv(const std::filesystem::path& path, const ClassificationResult& r) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  out << "class,threshold,precision,recall\n";
  for (const auto& [c, curve] : r.curves)
    for (const auto& p : curve) out << c << ',' << p.threshold << ',' << p.precision << ',' << p.recall << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_pr_svg(const std::filesystem::path& path, const ClassificationResult& r) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  constexpr double size = 400.0;
  constexpr double margin = 40.0;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size + 2 * margin << "\" height=\""
      << size + 2 * margin << "\">\n";
  out << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << size << "\" height=\"" << size
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  out << "<text x=\"" << margin + size / 2 << "\" y=\"" << 2 * margin + size - 8 << "\">recall</text>\n";
  out << "<text x=\"4\" y=\"" << margin + size / 2 << "\">precision</text>\n";
  std::size_t k = 0;
  for (const auto& [c, curve] : r.curves) {
    const char* color = colors[k % std::size(colors)];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
    for (const auto& p : curve) out << margin + p.recall * size << ',' << margin + (1 - p.precision) * size << ' ';
    out << "\"/>\n";
    out << "<text x=\"" << margin + 8 << "\" y=\"" << margin + 16 * (k + 1) << "\" fill=\"" << color << "\">" << c
        << "</text>\n";
    ++k;
  }
  out << "</svg>\n";
}

LabeledHierarchy label_hierarchy(const Hierarchy& h, const PartGraph& g) {
  LabeledHierarchy out{h, {}};
  for (const auto& p : g.parts) out.labels[p.id] = p.label;
  return out;
}

namespace {

const std::string& label_of(const LabeledHierarchy& s, int part) {
  auto it = s.labels.find(part);
  if (it == s.labels.end() || it->second.empty())
    throw std::invalid_argument("part " + std::to_string(part) + " has no label");
  return it->second;
}

bool contains(const std::vector<int>& v, int x) { return std::find(v.begin(), v.end(), x) != v.end(); }

double binary_entropy(double p) {
  double h = 0.0;
  if (p > 0.0) h -= p * std::log2(p);
  if (p < 1.0) h -= (1.0 - p) * std::log2(1.0 - p);
  return h;
}

}  // namespace

std::map<int, std::map<std::string, int>> merge_distances(const LabeledHierarchy& s) {
  const Hierarchy& h = s.hierarchy;
  const auto parents = h.parents();
  // Each part with the node it starts from and the edges already walked.
  std::vector<std::tuple<int, int, int>> starts;
  for (int i = 0; i < static_cast<int>(h.nodes.size()); ++i) {
    const auto& node = h[i];
    if (node.type == NodeType::leaf) {
      if (node.part < 0) throw std::invalid_argument("merge_distances: leaf without part id");
      starts.emplace_back(node.part, i, 0);
    } else if (node.type == NodeType::symmetry) {
      for (int p : node.parts)
        if (!contains(h[node.left].parts, p)) starts.emplace_back(p, i, 1);
    }
  }
  std::map<int, std::map<std::string, int>> out;
  for (const auto& [p, start, offset] : starts) {
    auto& row = out[p];
    const std::string& own = label_of(s, p);
    row[own] = 0;
    int dist = offset;
    for (int a = start; a >= 0; a = parents[static_cast<std::size_t>(a)]) {
      for (int q : h[a].parts) {
        if (q == p) continue;
        row.try_emplace(label_of(s, q), dist);
      }
      ++dist;
    }
  }
  return out;
}

ConsistencyReport consistency_metric(std::span<const LabeledHierarchy> shapes) {
  std::vector<std::map<int, std::map<std::string, int>>> dist;
  std::vector<std::set<std::string>> present;
  std::set<std::string> all;
  for (const auto& s : shapes) {
    dist.push_back(merge_distances(s));
    std::set<std::string> labels;
    for (const auto& [p, row] : dist.back()) labels.insert(label_of(s, p));
    all.insert(labels.begin(), labels.end());
    present.push_back(std::move(labels));
  }
  const std::vector<std::string> names(all.begin(), all.end());
  ConsistencyReport report;
  double total = 0.0;
  for (const auto& l : names) {
    for (std::size_t a = 0; a < names.size(); ++a) {
      for (std::size_t b = a + 1; b < names.size(); ++b) {
        const auto& l1 = names[a];
        const auto& l2 = names[b];
        if (l1 == l || l2 == l) continue;
        int forward = 0;
        int backward = 0;
        int parts = 0;
        for (std::size_t k = 0; k < shapes.size(); ++k) {
          if (!present[k].count(l) || !present[k].count(l1) || !present[k].count(l2)) continue;
          for (const auto& [p, row] : dist[k]) {
            if (label_of(shapes[k], p) != l) continue;
            const int h1 = row.at(l1);
            const int h2 = row.at(l2);
            forward += h1 < h2;
            backward += h2 < h1;
            ++parts;
          }
        }
        if (parts == 0) continue;
        TripleConsistency t{l, l1, l2, static_cast<double>(forward) / parts, static_cast<double>(backward) / parts,
                            parts, 0.0};
        t.entropy = 0.5 * (binary_entropy(t.p_forward) + binary_entropy(t.p_backward));
        total += t.entropy;
        report.triples.push_back(t);
      }
    }
  }
  if (report.triples.empty()) throw std::invalid_argument("consistency_metric: no label triple co-occurs in a shape");
  report.value = 1.0 - total / static_cast<double>(report.triples.size());
  return report;
}

Json ConsistencyReport::to_json() const {
  Json j;
  j["consistency"] = value;
  Json rows = Json::array();
  for (const auto& t : triples)
    rows.push_back({{"label", t.label},
                    {"first", t.first},
                    {"second", t.second},
                    {"p_forward", t.p_forward},
                    {"p_backward", t.p_backward},
                    {"parts", t.parts},
                    {"entropy", t.entropy}});
  j["triples"] = rows;
  return j;
}

std::vector<LabeledHierarchy> consistency_fixture(bool coin_flip) {
  auto leaf_box = [](int i) {
    Obbd b;
    b.center = Vec3d(0.2 * i, 0, 0);
    b.dims = Vec3d(0.1, 0.1, 0.1);
    b.axis1 = Vec3d::UnitX();
    b.axis2 = Vec3d::UnitY();
    return b;
  };
  std::vector<LabeledHierarchy> out;
  if (!coin_flip) {
    for (int s = 0; s < 3; ++s) {
      LabeledHierarchy lh;
      auto& h = lh.hierarchy;
      const int ab = h.add_adjacency(h.add_leaf(0, leaf_box(0)), h.add_leaf(1, leaf_box(1)));
      h.add_adjacency(ab, h.add_leaf(2, leaf_box(2)));
      lh.labels = {{0, "a"}, {1, "b"}, {2, "c"}};
      out.push_back(std::move(lh));
    }
    return out;
  }
  const std::vector<std::array<std::string, 3>> triples{{"a", "b", "c"}, {"b", "a", "c"}, {"c", "a", "b"}};
  for (const auto& [x, y, z] : triples) {
    LabeledHierarchy lh;
    auto& h = lh.hierarchy;
    const int left = h.add_adjacency(h.add_leaf(0, leaf_box(0)), h.add_leaf(1, leaf_box(1)));
    const int right = h.add_adjacency(h.add_leaf(2, leaf_box(2)), h.add_leaf(3, leaf_box(3)));
    h.add_adjacency(left, right);
    lh.labels = {{0, x}, {1, y}, {2, x}, {3, z}};
    out.push_back(std::move(lh));
  }
  return out;
}

std::vector<SubtreeMatch> partial_match(const Vector& query, std::span<const Hierarchy> corpus, int top_k) {
  std::vector<SubtreeMatch> all;
  for (std::size_t s = 0; s < corpus.size(); ++s)
    for (int i = 0; i < static_cast<int>(corpus[s].nodes.size()); ++i)
      all.push_back({static_cast<int>(s), i, (avg_code_feature(corpus[s], i) - query).norm()});
  std::stable_sort(all.begin(), all.end(),
                   [](const SubtreeMatch& a, const SubtreeMatch& b) { return a.distance < b.distance; });
  if (top_k >= 0 && static_cast<std::size_t>(top_k) < all.size()) all.resize(static_cast<std::size_t>(top_k));
  return all;
}

std::string subtree_label(const LabeledHierarchy& s, int node) {
  const auto& parts = s.hierarchy[node].parts;
  if (parts.empty()) return "";
  const std::string& first = label_of(s, parts.front());
  for (int p : parts)
    if (label_of(s, p) != first) return "";
  return first;
}

int largest_labeled_subtree(const LabeledHierarchy& s, const std::string& label) {
  int best = -1;
  for (int i = 0; i < static_cast<int>(s.hierarchy.nodes.size()); ++i) {
    if (subtree_label(s, i) != label) continue;
    if (best < 0 || s.hierarchy[i].parts.size() > s.hierarchy[best].parts.size()) best = i;
  }
  return best;
}

int RuleReport::agreement() const {
  return static_cast<int>(std::count_if(rows.begin(), rows.end(), [](const RuleRow& r) { return r.agrees; }));
}

namespace {

std::string set_text(const std::vector<int>& parts) {
  std::string s = "{";
  for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? "," : "") + std::to_string(parts[i]);
  return s + "}";
}

}  // namespace

Json RuleReport::to_json() const {
  Json j;
  Json arr = Json::array();
  for (const auto& r : rows) {
    Json expected = Json::array();
    for (const auto& e : r.expected) expected.push_back(std::vector<int>(e.begin(), e.end()));
    arr.push_back({{"rule", r.rule},
                   {"expectation", r.expectation},
                   {"expected_first", expected},
                   {"first_merge", r.first_merge},
                   {"agrees", r.agrees}});
  }
  j["rules"] = arr;
  j["agreement"] = agreement();
  j["total"] = rows.size();
  return j;
}

std::string RuleReport::to_text() const {
  std::ostringstream out;
  for (const auto& r : rows) {
    std::string expected;
    for (const auto& e : r.expected) expected += (expected.empty() ? "" : " or ") + set_text({e.begin(), e.end()});
    out << r.rule << "  " << (r.agrees ? "agree   " : "disagree") << "  first " << set_text(r.first_merge)
        << "  expected " << expected << "  (" << r.expectation << ")\n";
  }
  out << "agreement " << agreement() << "/" << rows.size() << "\n";
  return out.str();
}

RuleReport rule_fixture_report(std::span<const RuleFixture> fixtures, const RvnnModel& model,
                               const InferOptions& options) {
  RuleReport report;
  for (const auto& f : fixtures) {
    RuleRow row{f.rule, f.expectation, f.expected_first, {}, false};
    std::vector<std::vector<int>> merges;
    infer_hierarchy(f.graph, model, options, &merges);
    if (!merges.empty()) {
      row.first_merge = merges.front();
      std::sort(row.first_merge.begin(), row.first_merge.end());
      const std::set<int> first(row.first_merge.begin(), row.first_merge.end());
      row.agrees = std::find(f.expected_first.begin(), f.expected_first.end(), first) != f.expected_first.end();
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace grass
