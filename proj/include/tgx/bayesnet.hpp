#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tgx/error.hpp"
#include "tgx/perturbation.hpp"

namespace tgx {

// Every variable takes values in {0,1,2}: seed + change indicator.
inline constexpr int kCardinality = 3;

using Edge = std::pair<int, int>;  // (parent, child) node indices

// Discrete DAG over node variables. Variables and edges are kept sorted so
// that equal structures compare and serialize identically.
class BayesianNetwork {
public:
  BayesianNetwork() = default;
  BayesianNetwork(std::vector<int> variables, int target, std::vector<Edge> edges = {})
      : variables_(std::move(variables)), target_(target) {
    std::sort(variables_.begin(), variables_.end());
    if (std::adjacent_find(variables_.begin(), variables_.end()) != variables_.end()) {
      throw ValueError("duplicate variable in network");
    }
    if (!has_variable(target_)) throw ValueError("target " + std::to_string(target_) + " is not a network variable");
    for (auto [p, c] : edges) add_edge(p, c);
  }

  const std::vector<int>& variables() const { return variables_; }
  const std::vector<Edge>& edges() const { return edges_; }
  int target() const { return target_; }
  int num_variables() const { return static_cast<int>(variables_.size()); }

  // Snapshot that produced this network, -1 when not applicable.
  int snapshot = -1;

  bool has_variable(int v) const { return std::binary_search(variables_.begin(), variables_.end(), v); }
  bool has_edge(int p, int c) const { return std::binary_search(edges_.begin(), edges_.end(), Edge{p, c}); }

  std::vector<int> parents(int child) const {
    std::vector<int> out;
    for (auto [p, c] : edges_)
      if (c == child) out.push_back(p);
    std::sort(out.begin(), out.end());
    return out;
  }

  // True if p -> c would close a directed cycle, i.e. p is reachable from c.
  bool creates_cycle(int p, int c) const {
    if (p == c) return true;
    std::vector<int> stack{c};
    std::vector<int> seen{c};
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (auto [a, b] : edges_) {
        if (a != u) continue;
        if (b == p) return true;
        if (std::find(seen.begin(), seen.end(), b) == seen.end()) {
          seen.push_back(b);
          stack.push_back(b);
        }
      }
    }
    return false;
  }

  void add_edge(int p, int c) {
    if (!has_variable(p) || !has_variable(c)) throw ValueError("edge endpoint is not a network variable");
    if (p == c) throw ValueError("self-loop on " + std::to_string(p));
    if (has_edge(p, c)) throw ValueError("duplicate edge");
    if (creates_cycle(p, c)) throw ValueError("edge " + std::to_string(p) + "->" + std::to_string(c) + " creates a cycle");
    edges_.insert(std::upper_bound(edges_.begin(), edges_.end(), Edge{p, c}), Edge{p, c});
  }

  void remove_edge(int p, int c) {
    auto it = std::lower_bound(edges_.begin(), edges_.end(), Edge{p, c});
    if (it == edges_.end() || *it != Edge{p, c}) throw ValueError("edge not present");
    edges_.erase(it);
  }

  // Edgeless network over the same variables.
  BayesianNetwork empty_copy() const {
    BayesianNetwork b;
    b.variables_ = variables_;
    b.target_ = target_;
    b.snapshot = snapshot;
    return b;
  }

  // Structural equality; the originating snapshot is ignored.
  bool operator==(const BayesianNetwork& o) const {
    return variables_ == o.variables_ && edges_ == o.edges_ && target_ == o.target_;
  }

private:
  std::vector<int> variables_;
  std::vector<Edge> edges_;
  int target_ = 0;
};

inline bool is_acyclic(const std::vector<int>& variables, const std::vector<Edge>& edges) {
  // Kahn's algorithm
  std::map<int, int> indegree;
  for (int v : variables) indegree[v] = 0;
  for (auto [p, c] : edges) ++indegree[c];
  std::vector<int> ready;
  for (auto [v, d] : indegree)
    if (d == 0) ready.push_back(v);
  size_t removed = 0;
  while (!ready.empty()) {
    int u = ready.back();
    ready.pop_back();
    ++removed;
    for (auto [p, c] : edges)
      if (p == u && --indegree[c] == 0) ready.push_back(c);
  }
  return removed == indegree.size();
}

inline std::uint64_t num_parent_configs(size_t num_parents) {
  std::uint64_t q = 1;
  for (size_t i = 0; i < num_parents; ++i) q *= kCardinality;
  return q;
}

// N_ijk for one variable: counts[j * 3 + k], parent configuration j in
// mixed-radix order over ascending parents (first parent most significant).
struct FamilyTable {
  int node = 0;
  std::vector<int> parents;
  std::vector<std::int64_t> counts;

  std::uint64_t configs() const { return counts.size() / kCardinality; }
  std::int64_t marginal(std::uint64_t j) const {
    std::int64_t s = 0;
    for (int k = 0; k < kCardinality; ++k) s += counts[j * kCardinality + static_cast<std::uint64_t>(k)];
    return s;
  }
};

struct FamilyCounts {
  std::vector<FamilyTable> families;  // one per network variable, ascending node order
};

inline int require_column(const SnapshotDataset& d, int node) {
  auto col = d.column_of(node);
  if (!col) throw MissingVariableError("node " + std::to_string(node) + " missing from snapshot " + std::to_string(d.t));
  return *col;
}

inline FamilyTable count_family(const SnapshotDataset& d, int node, const std::vector<int>& parents) {
  FamilyTable f;
  f.node = node;
  f.parents = parents;
  std::sort(f.parents.begin(), f.parents.end());
  const int child_col = require_column(d, node);
  std::vector<int> parent_cols;
  for (int p : f.parents) parent_cols.push_back(require_column(d, p));
  f.counts.assign(num_parent_configs(f.parents.size()) * kCardinality, 0);
  const size_t stride = d.variables.size();
  for (int s = 0; s < d.num_samples; ++s) {
    const std::uint8_t* row = d.realizations.data() + static_cast<size_t>(s) * stride;
    std::uint64_t j = 0;
    for (int pc : parent_cols) j = j * kCardinality + row[pc];
    ++f.counts[j * kCardinality + row[child_col]];
  }
  return f;
}

inline FamilyCounts family_counts(const BayesianNetwork& b, const SnapshotDataset& d) {
  FamilyCounts out;
  for (int v : b.variables()) out.families.push_back(count_family(d, v, b.parents(v)));
  return out;
}

// Conditional probability tables; probs[j * 3 + k] = P(X = k | parents = j).
struct CPTParams {
  std::vector<FamilyTable> structure;
  std::vector<std::vector<double>> probs;
};

// Maximum-likelihood tables; parent configurations never observed get a uniform row.
inline CPTParams mle_fit(const FamilyCounts& counts) {
  CPTParams p;
  p.structure = counts.families;
  for (const auto& f : counts.families) {
    std::vector<double> table(f.counts.size());
    for (std::uint64_t j = 0; j < f.configs(); ++j) {
      const auto total = f.marginal(j);
      for (std::uint64_t k = 0; k < kCardinality; ++k) {
        table[j * kCardinality + k] =
            total == 0 ? 1.0 / kCardinality
                       : static_cast<double>(f.counts[j * kCardinality + k]) / static_cast<double>(total);
      }
    }
    p.probs.push_back(std::move(table));
  }
  return p;
}

inline CPTParams mle_fit(const BayesianNetwork& b, const SnapshotDataset& d) { return mle_fit(family_counts(b, d)); }

inline double family_log_likelihood(const FamilyTable& f) {
  double ll = 0.0;
  for (std::uint64_t j = 0; j < f.configs(); ++j) {
    const auto total = f.marginal(j);
    if (total == 0) continue;
    for (std::uint64_t k = 0; k < kCardinality; ++k) {
      const auto n = f.counts[j * kCardinality + k];
      if (n > 0) ll += static_cast<double>(n) * std::log(static_cast<double>(n) / static_cast<double>(total));
    }
  }
  return ll;
}

inline double log_likelihood(const FamilyCounts& counts) {
  double ll = 0.0;
  for (const auto& f : counts.families) ll += family_log_likelihood(f);
  return ll;
}

inline double log_likelihood(const BayesianNetwork& b, const SnapshotDataset& d) {
  return log_likelihood(family_counts(b, d));
}

// Free parameters of one family: (r - 1) * r^|parents|.
inline std::int64_t family_dim(size_t num_parents) {
  return static_cast<std::int64_t>((kCardinality - 1) * num_parent_configs(num_parents));
}

inline std::int64_t dim(const BayesianNetwork& b) {
  std::int64_t total = 0;
  for (int v : b.variables()) total += family_dim(b.parents(v).size());
  return total;
}

inline double bic_penalty(int num_samples) { return std::log(static_cast<double>(num_samples)) / 2.0; }

// Contribution of one family to the BIC score; the score is the sum over families.
inline double family_score(const SnapshotDataset& d, int node, const std::vector<int>& parents) {
  if (d.num_samples == 0) throw EmptyDataError("BIC score needs at least one sample");
  return family_log_likelihood(count_family(d, node, parents)) -
         bic_penalty(d.num_samples) * static_cast<double>(family_dim(parents.size()));
}

// l(θ̂ : D) - (ln n / 2) Dim[B], natural logarithms throughout.
inline double bic_score(const BayesianNetwork& b, const SnapshotDataset& d) {
  if (d.num_samples == 0) throw EmptyDataError("BIC score needs at least one sample");
  return log_likelihood(b, d) - bic_penalty(d.num_samples) * static_cast<double>(dim(b));
}

// --- serialization -----------------------------------------------------------

inline nlohmann::ordered_json network_json(const BayesianNetwork& b) {
  nlohmann::ordered_json j;
  j["target"] = b.target();
  j["variables"] = b.variables();
  nlohmann::ordered_json edges = nlohmann::ordered_json::array();
  for (auto [p, c] : b.edges()) edges.push_back({p, c});
  j["edges"] = edges;
  return j;
}

// Compact sorted form used for deduplication and equality across runs.
inline std::string canonical_form(const BayesianNetwork& b) { return network_json(b).dump(); }

inline BayesianNetwork network_from_json(const nlohmann::json& j) {
  try {
    std::vector<Edge> edges;
    for (const auto& e : j.at("edges")) edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    BayesianNetwork b(j.at("variables").get<std::vector<int>>(), j.at("target").get<int>(), edges);
    if (j.contains("snapshot")) b.snapshot = j.at("snapshot").get<int>();
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("network document: ") + e.what());
  }
}

inline BayesianNetwork parse_network(const std::string& text) {
  try {
    return network_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("network document: ") + e.what());
  }
}

// GraphViz rendering; the target node is drawn as a filled double circle labelled TN.
inline std::string to_dot(const BayesianNetwork& b, const std::vector<std::string>& labels = {}) {
  auto name = [&](int v) {
    return labels.empty() ? std::to_string(v) : labels.at(static_cast<size_t>(v));
  };
  std::string out = "digraph explanation {\n";
  if (b.snapshot >= 0) out += "  label=\"snapshot " + std::to_string(b.snapshot) + "\";\n";
  out += "  node [shape=circle];\n";
  for (int v : b.variables()) {
    out += "  n" + std::to_string(v) + " [label=\"";
    if (v == b.target()) {
      out += "TN " + name(v) + "\", shape=doublecircle, style=filled, fillcolor=\"#f4a582\"];\n";
    } else {
      out += name(v) + "\"];\n";
    }
  }
  for (auto [p, c] : b.edges()) out += "  n" + std::to_string(p) + " -> n" + std::to_string(c) + ";\n";
  out += "}\n";
  return out;
}

}  // namespace tgx
