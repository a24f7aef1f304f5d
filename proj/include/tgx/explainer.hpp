#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <tuple>
#include <utility>
#include <vector>

#include "tgx/bayesnet.hpp"
#include "tgx/perturbation.hpp"

namespace tgx {

// Pearson chi-square statistic of the 3x3 contingency table of two columns.
inline double chi_square(const SnapshotDataset& d, int col_a, int col_b) {
  double table[kCardinality][kCardinality] = {};
  double row[kCardinality] = {}, col[kCardinality] = {};
  for (int s = 0; s < d.num_samples; ++s) {
    const auto a = d.value(s, col_a), b = d.value(s, col_b);
    table[a][b] += 1.0;
    row[a] += 1.0;
    col[b] += 1.0;
  }
  const double n = d.num_samples;
  double stat = 0.0;
  for (int a = 0; a < kCardinality; ++a) {
    for (int b = 0; b < kCardinality; ++b) {
      const double expected = row[a] * col[b] / n;
      if (expected > 0.0) stat += (table[a][b] - expected) * (table[a][b] - expected) / expected;
    }
  }
  return stat;
}

// Keeps the target plus the M-1 variables most dependent on it by chi-square.
// Constant columns never qualify; ties go to the lower node index.
inline std::vector<int> select_variables(const SnapshotDataset& d, int target, int max_variables) {
  if (max_variables < 2) throw ValueError("variable budget M must be at least 2");
  const int target_col = require_column(d, target);
  if (max_variables >= d.num_variables()) return d.variables;

  std::vector<std::pair<double, int>> ranked;  // (statistic, node)
  for (int c = 0; c < d.num_variables(); ++c) {
    if (c == target_col) continue;
    const auto values = d.column(c);
    if (values.empty() || std::all_of(values.begin(), values.end(), [&](auto v) { return v == values.front(); })) {
      continue;
    }
    ranked.emplace_back(chi_square(d, c, target_col), d.variables[static_cast<size_t>(c)]);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<int> out{target};
  for (size_t i = 0; i < ranked.size() && out.size() < static_cast<size_t>(max_variables); ++i) {
    out.push_back(ranked[i].second);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Caches family scores of one dataset keyed by (node, sorted parents).
class FamilyScoreCache {
public:
  explicit FamilyScoreCache(const SnapshotDataset& d) : data_(d) {}

  double operator()(int node, std::vector<int> parents) {
    std::sort(parents.begin(), parents.end());
    auto key = std::make_pair(node, parents);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    const double s = family_score(data_, node, parents);
    cache_.emplace(std::move(key), s);
    return s;
  }

private:
  const SnapshotDataset& data_;
  std::map<std::pair<int, std::vector<int>>, double> cache_;
};

enum class MoveKind { Add = 0, Delete = 1, Reverse = 2 };

// Gains below this are treated as zero, so score-equivalent edge reversals
// (whose computed gain is rounding noise) are not accepted.
inline constexpr double kMinStructureGain = 1e-9;

// Greedy hill climbing from the empty graph over single-edge add / delete /
// reverse moves, scanned in (parent, child, kind) order. Each round applies
// the move with the largest positive BIC gain, keeping the graph acyclic and
// every node within `max_parents`.
inline BayesianNetwork learn_structure(const SnapshotDataset& d, const std::vector<int>& variables,
                                       int max_parents = 3) {
  if (max_parents < 1) throw ValueError("max_parents must be at least 1");
  if (d.num_samples == 0) throw EmptyDataError("structure learning needs samples");
  BayesianNetwork b(variables, d.target);
  b.snapshot = d.t;
  for (int v : b.variables()) require_column(d, v);
  FamilyScoreCache score(d);

  auto without = [](std::vector<int> v, int x) {
    v.erase(std::remove(v.begin(), v.end(), x), v.end());
    return v;
  };
  auto with = [](std::vector<int> v, int x) {
    v.push_back(x);
    return v;
  };

  while (true) {
    double best_gain = kMinStructureGain;
    std::optional<std::tuple<int, int, MoveKind>> best;
    for (int p : b.variables()) {
      for (int c : b.variables()) {
        if (p == c) continue;
        const auto pa_c = b.parents(c);
        if (!b.has_edge(p, c)) {
          if (static_cast<int>(pa_c.size()) < max_parents && !b.has_edge(c, p) && !b.creates_cycle(p, c)) {
            const double gain = score(c, with(pa_c, p)) - score(c, pa_c);
            if (gain > best_gain) {
              best_gain = gain;
              best = {p, c, MoveKind::Add};
            }
          }
          continue;
        }
        const double drop = score(c, without(pa_c, p)) - score(c, pa_c);
        if (drop > best_gain) {
          best_gain = drop;
          best = {p, c, MoveKind::Delete};
        }
        const auto pa_p = b.parents(p);
        if (static_cast<int>(pa_p.size()) < max_parents) {
          BayesianNetwork trial = b;
          trial.remove_edge(p, c);
          if (!trial.creates_cycle(c, p)) {
            const double gain = drop + score(p, with(pa_p, c)) - score(p, pa_p);
            if (gain > best_gain) {
              best_gain = gain;
              best = {p, c, MoveKind::Reverse};
            }
          }
        }
      }
    }
    if (!best) break;
    auto [p, c, kind] = *best;
    switch (kind) {
      case MoveKind::Add: b.add_edge(p, c); break;
      case MoveKind::Delete: b.remove_edge(p, c); break;
      case MoveKind::Reverse:
        b.remove_edge(p, c);
        b.add_edge(c, p);
        break;
    }
  }
  return b;
}

// Default variable budget: 2-hop neighborhood plus the target, at most 12.
inline int default_max_variables(const TemporalGraph& g, int target) {
  return std::min<int>(static_cast<int>(k_hop_neighbors(g, target, 2).size()) + 1, 12);
}

struct ExplainOptions {
  int max_variables = 12;  // M
  int max_parents = 3;
};

// Variable selection followed by structure search on one snapshot's data.
inline BayesianNetwork explain_dataset(const SnapshotDataset& d, const ExplainOptions& opts) {
  return learn_structure(d, select_variables(d, d.target, opts.max_variables), opts.max_parents);
}

struct SnapshotExplanation {
  SnapshotDataset data;
  BayesianNetwork network;
};

inline SnapshotExplanation explain_snapshot(ModelOracle& oracle, const TemporalGraph& g, int t, int target,
                                            const std::vector<int>& variables, const PerturbationConfig& cfg,
                                            const ExplainOptions& opts, const TimeWindow& interval) {
  SnapshotExplanation out{generate_snapshot_dataset(oracle, g, t, target, variables, cfg, interval), {}};
  out.network = explain_dataset(out.data, opts);
  return out;
}

inline SnapshotExplanation explain_snapshot(ModelOracle& oracle, const TemporalGraph& g, int t, int target,
                                            const PerturbationConfig& cfg, const ExplainOptions& opts) {
  return explain_snapshot(oracle, g, t, target, default_variables(g, target), cfg, opts, TimeWindow{t, t});
}

}  // namespace tgx
