#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tgx/csv.hpp"
#include "tgx/error.hpp"

namespace tgx {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Inclusive range of snapshot indices.
struct TimeWindow {
  int start = 0;
  int end = 0;

  constexpr int length() const { return end - start + 1; }
  constexpr bool contains(int t) const { return start <= t && t <= end; }
  constexpr bool contains(const TimeWindow& other) const {
    return start <= other.start && other.end <= end;
  }
  constexpr bool strict_superset_of(const TimeWindow& other) const {
    return contains(other) && !(*this == other);
  }
  constexpr bool operator==(const TimeWindow&) const = default;
  constexpr auto operator<=>(const TimeWindow&) const = default;
};

inline double jaccard(const TimeWindow& a, const TimeWindow& b) {
  int lo = std::max(a.start, b.start), hi = std::min(a.end, b.end);
  int inter = std::max(0, hi - lo + 1);
  int uni = a.length() + b.length() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / uni;
}

// Static road/sensor graph plus a feature matrix (n_nodes x f) per time step.
class TemporalGraph {
public:
  TemporalGraph(Matrix adjacency, std::vector<Matrix> features,
                std::vector<std::string> labels = {})
      : adjacency_(std::move(adjacency)), features_(std::move(features)), labels_(std::move(labels)) {
    validate();
  }

  int n_nodes() const { return static_cast<int>(adjacency_.rows()); }
  int steps() const { return static_cast<int>(features_.size()); }
  int feature_dim() const { return features_.empty() ? 0 : static_cast<int>(features_.front().cols()); }

  const Matrix& adjacency() const { return adjacency_; }
  const std::vector<Matrix>& features() const { return features_; }
  const Matrix& frame(int t) const {
    if (t < 0 || t >= steps()) throw IndexError("time step " + std::to_string(t) + " out of range");
    return features_[static_cast<size_t>(t)];
  }
  const std::vector<std::string>& labels() const { return labels_; }
  std::string label(int node) const {
    return labels_.empty() ? std::to_string(node) : labels_.at(static_cast<size_t>(node));
  }

  bool operator==(const TemporalGraph& o) const {
    if (adjacency_.rows() != o.adjacency_.rows() || features_.size() != o.features_.size()) return false;
    if (adjacency_ != o.adjacency_ || labels_ != o.labels_) return false;
    for (size_t t = 0; t < features_.size(); ++t) {
      if (features_[t].rows() != o.features_[t].rows() || features_[t].cols() != o.features_[t].cols() ||
          features_[t] != o.features_[t])
        return false;
    }
    return true;
  }

private:
  void validate() const {
    if (adjacency_.rows() == 0 || adjacency_.rows() != adjacency_.cols()) {
      throw DimensionError("adjacency must be a non-empty square matrix, got " +
                           std::to_string(adjacency_.rows()) + "x" + std::to_string(adjacency_.cols()));
    }
    if (!adjacency_.allFinite()) throw ValueError("adjacency contains NaN or Inf");
    if ((adjacency_.array() < 0.0).any()) throw ValueError("adjacency contains negative entries");
    if (features_.empty()) throw DimensionError("feature series is empty");
    const auto f = features_.front().cols();
    if (f <= 0) throw DimensionError("feature dimension must be positive");
    for (size_t t = 0; t < features_.size(); ++t) {
      if (features_[t].rows() != adjacency_.rows() || features_[t].cols() != f) {
        throw DimensionError("feature frame " + std::to_string(t) + " has shape " +
                             std::to_string(features_[t].rows()) + "x" + std::to_string(features_[t].cols()) +
                             ", expected " + std::to_string(adjacency_.rows()) + "x" + std::to_string(f));
      }
      if (!features_[t].allFinite()) throw ValueError("feature frame " + std::to_string(t) + " has NaN/Inf");
    }
    if (!labels_.empty() && labels_.size() != static_cast<size_t>(adjacency_.rows())) {
      throw DimensionError("label count does not match node count");
    }
  }

  Matrix adjacency_;
  std::vector<Matrix> features_;
  std::vector<std::string> labels_;
};

// D^{-1/2} (A + I) D^{-1/2}, with D the degree matrix of A + I.
struct NormalizedAdjacency {
  Matrix matrix;
};

inline NormalizedAdjacency normalize_adjacency(const Matrix& adjacency) {
  const auto n = adjacency.rows();
  Matrix a_hat = adjacency + Matrix::Identity(n, n);
  Vector degree = a_hat.rowwise().sum();
  // Unreachable for valid input: the identity makes every degree >= 1.
  if ((degree.array() <= 0.0).any()) throw ValueError("zero degree row in A + I");
  Vector inv_sqrt = degree.array().rsqrt();
  return {inv_sqrt.asDiagonal() * a_hat * inv_sqrt.asDiagonal()};
}

inline NormalizedAdjacency normalize_adjacency(const TemporalGraph& g) {
  return normalize_adjacency(g.adjacency());
}

// Nodes within `k` hops of `node` (excluding itself), ascending. Edge weights
// are ignored and either direction of a nonzero entry counts as an edge.
inline std::vector<int> k_hop_neighbors(const Matrix& adjacency, int node, int k) {
  const int n = static_cast<int>(adjacency.rows());
  if (node < 0 || node >= n) throw IndexError("node " + std::to_string(node) + " out of range");
  std::vector<int> dist(static_cast<size_t>(n), -1);
  std::queue<int> frontier;
  dist[static_cast<size_t>(node)] = 0;
  frontier.push(node);
  while (!frontier.empty()) {
    int u = frontier.front();
    frontier.pop();
    if (dist[static_cast<size_t>(u)] >= k) continue;
    for (int v = 0; v < n; ++v) {
      if (dist[static_cast<size_t>(v)] < 0 && (adjacency(u, v) > 0.0 || adjacency(v, u) > 0.0)) {
        dist[static_cast<size_t>(v)] = dist[static_cast<size_t>(u)] + 1;
        frontier.push(v);
      }
    }
  }
  std::vector<int> out;
  for (int v = 0; v < n; ++v) {
    if (v != node && dist[static_cast<size_t>(v)] > 0) out.push_back(v);
  }
  return out;
}

inline std::vector<int> k_hop_neighbors(const TemporalGraph& g, int node, int k) {
  return k_hop_neighbors(g.adjacency(), node, k);
}

// Per-node mean feature row over the inclusive step range.
inline Matrix temporal_mean(const TemporalGraph& g, int first, int last) {
  if (first < 0 || last >= g.steps() || first > last) {
    throw RangeError("mean range [" + std::to_string(first) + "," + std::to_string(last) + "] outside features");
  }
  Matrix sum = Matrix::Zero(g.n_nodes(), g.feature_dim());
  for (int t = first; t <= last; ++t) sum += g.frame(t);
  return sum / static_cast<double>(last - first + 1);
}

struct LoadOptions {
  bool header = false;
  std::optional<std::filesystem::path> labels_path;
};

// Adjacency CSV: n rows of n numbers. Features CSV: one row per time step,
// one column per node (feature dimension 1).
inline TemporalGraph load_dataset(const std::filesystem::path& adjacency_path,
                                  const std::filesystem::path& features_path, const LoadOptions& opts = {}) {
  auto adj_rows = csv::read_numeric(adjacency_path, opts.header);
  const auto n = adj_rows.size();
  for (const auto& row : adj_rows) {
    if (row.size() != n) {
      throw DimensionError("adjacency is not square: " + std::to_string(n) + " rows, a row has " +
                           std::to_string(row.size()) + " columns");
    }
  }
  if (n == 0) throw DimensionError("adjacency file is empty");
  Matrix adjacency(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) adjacency(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = adj_rows[i][j];

  auto feat_rows = csv::read_numeric(features_path, opts.header);
  std::vector<Matrix> frames;
  frames.reserve(feat_rows.size());
  for (size_t t = 0; t < feat_rows.size(); ++t) {
    if (feat_rows[t].size() != n) {
      throw DimensionError("features row " + std::to_string(t + 1) + " has " + std::to_string(feat_rows[t].size()) +
                           " columns, adjacency has " + std::to_string(n) + " nodes");
    }
    Matrix frame(static_cast<Eigen::Index>(n), 1);
    for (size_t i = 0; i < n; ++i) frame(static_cast<Eigen::Index>(i), 0) = feat_rows[t][i];
    frames.push_back(std::move(frame));
  }

  std::vector<std::string> labels;
  if (opts.labels_path) {
    for (auto& line : csv::split_lines(csv::read_file(*opts.labels_path))) {
      if (!csv::trim(line).empty()) labels.emplace_back(csv::trim(line));
    }
  }
  return TemporalGraph(std::move(adjacency), std::move(frames), std::move(labels));
}

inline std::string adjacency_csv(const TemporalGraph& g) {
  std::string out;
  for (int i = 0; i < g.n_nodes(); ++i) {
    for (int j = 0; j < g.n_nodes(); ++j) {
      if (j) out += ',';
      out += csv::format_double(g.adjacency()(i, j));
    }
    out += '\n';
  }
  return out;
}

inline std::string features_csv(const TemporalGraph& g) {
  if (g.feature_dim() != 1) throw DimensionError("CSV feature export supports feature dimension 1 only");
  std::string out;
  for (int t = 0; t < g.steps(); ++t) {
    for (int i = 0; i < g.n_nodes(); ++i) {
      if (i) out += ',';
      out += csv::format_double(g.frame(t)(i, 0));
    }
    out += '\n';
  }
  return out;
}

inline void save_dataset(const TemporalGraph& g, const std::filesystem::path& adjacency_path,
                         const std::filesystem::path& features_path,
                         const std::optional<std::filesystem::path>& labels_path = std::nullopt) {
  csv::write_atomic(adjacency_path, adjacency_csv(g));
  csv::write_atomic(features_path, features_csv(g));
  if (labels_path && !g.labels().empty()) {
    std::string text;
    for (const auto& l : g.labels()) text += l + "\n";
    csv::write_atomic(*labels_path, text);
  }
}

}  // namespace tgx
