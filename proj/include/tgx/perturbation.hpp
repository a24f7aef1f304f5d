#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tgx/csv.hpp"
#include "tgx/error.hpp"
#include "tgx/model.hpp"
#include "tgx/rng.hpp"
#include "tgx/temporal_graph.hpp"

namespace tgx {

enum class PerturbMode { MeanReplace, ZeroReplace };

inline std::string to_string(PerturbMode m) { return m == PerturbMode::MeanReplace ? "mean-replace" : "zero-replace"; }

inline PerturbMode parse_perturb_mode(const std::string& s) {
  if (s == "mean-replace" || s == "mean") return PerturbMode::MeanReplace;
  if (s == "zero-replace" || s == "zero") return PerturbMode::ZeroReplace;
  throw ParseError("unknown perturbation mode '" + s + "'");
}

struct PerturbationConfig {
  int num_samples = 1000;
  double perturb_prob = 0.2;
  double change_threshold = 0.01;
  PerturbMode mode = PerturbMode::MeanReplace;
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (num_samples <= 0) throw ValueError("num_samples must be positive");
    if (!(perturb_prob > 0.0 && perturb_prob < 1.0)) throw ValueError("perturb_prob must lie in (0,1)");
    if (!(change_threshold >= 0.0) || !std::isfinite(change_threshold)) {
      throw ValueError("change_threshold must be a non-negative real");
    }
  }
};

// Discrete perturbation samples for one snapshot. Each entry is
// seed (node was perturbed) + change indicator (its prediction moved), in {0,1,2}.
struct SnapshotDataset {
  int t = 0;
  int target = 0;
  std::vector<int> variables;  // ascending node indices
  int num_samples = 0;
  std::vector<std::uint8_t> realizations;  // row-major num_samples x variables.size()
  std::vector<std::uint8_t> seeds;         // same layout, entries in {0,1}

  int num_variables() const { return static_cast<int>(variables.size()); }
  std::uint8_t value(int sample, int column) const {
    return realizations[static_cast<size_t>(sample) * variables.size() + static_cast<size_t>(column)];
  }
  std::uint8_t seed(int sample, int column) const {
    return seeds[static_cast<size_t>(sample) * variables.size() + static_cast<size_t>(column)];
  }
  std::optional<int> column_of(int node) const {
    auto it = std::lower_bound(variables.begin(), variables.end(), node);
    if (it == variables.end() || *it != node) return std::nullopt;
    return static_cast<int>(it - variables.begin());
  }
  std::vector<std::uint8_t> column(int col) const {
    std::vector<std::uint8_t> out(static_cast<size_t>(num_samples));
    for (int s = 0; s < num_samples; ++s) out[static_cast<size_t>(s)] = value(s, col);
    return out;
  }

  bool operator==(const SnapshotDataset&) const = default;
};

struct TemporalDataset {
  TimeWindow interval;
  int target = 0;
  std::vector<int> variables;
  std::vector<SnapshotDataset> snapshots;  // snapshots[i] is time interval.start + i

  const SnapshotDataset& at(int t) const {
    if (!interval.contains(t)) throw RangeError("snapshot " + std::to_string(t) + " outside dataset interval");
    return snapshots[static_cast<size_t>(t - interval.start)];
  }
  int length() const { return interval.length(); }
};

// Copy of `x_last` where every variable node whose seed is 1 has its feature
// row replaced by `replacement` (mean-replace) or zeros.
inline Matrix perturb_features(const Matrix& x_last, std::span<const int> variables,
                               std::span<const std::uint8_t> seeds, PerturbMode mode, const Matrix& replacement) {
  if (seeds.size() != variables.size()) throw ShapeError("seed vector length does not match variables");
  Matrix x = x_last;
  for (size_t i = 0; i < variables.size(); ++i) {
    if (!seeds[i]) continue;
    const int node = variables[i];
    if (node < 0 || node >= x.rows()) throw IndexError("variable node " + std::to_string(node) + " out of range");
    if (mode == PerturbMode::MeanReplace) {
      x.row(node) = replacement.row(node);
    } else {
      x.row(node).setZero();
    }
  }
  return x;
}

// Per-node replacement values: temporal mean over the features that feed the
// explained interval, i.e. steps [start, end + window - 1].
inline Matrix replacement_values(const TemporalGraph& g, const TimeWindow& interval, int window) {
  return temporal_mean(g, interval.start, interval.end + window - 1);
}

inline Matrix perturb_features(const TemporalGraph& g, int t_last, std::span<const int> variables,
                               std::span<const std::uint8_t> seeds, PerturbMode mode,
                               const TimeWindow& mean_steps) {
  const Matrix replacement = mode == PerturbMode::MeanReplace
                                 ? temporal_mean(g, mean_steps.start, mean_steps.end)
                                 : Matrix::Zero(g.n_nodes(), g.feature_dim());
  return perturb_features(g.frame(t_last), variables, seeds, mode, replacement);
}

// q_i = 1 iff |y_pert_i - y_orig_i| > threshold.
inline std::vector<std::uint8_t> prediction_changed(const Prediction& original, const Prediction& perturbed,
                                                    double threshold) {
  if (original.y.size() != perturbed.y.size()) throw ShapeError("prediction lengths differ");
  std::vector<std::uint8_t> q(static_cast<size_t>(original.y.size()));
  for (Eigen::Index i = 0; i < original.y.size(); ++i) {
    q[static_cast<size_t>(i)] = std::abs(perturbed.y(i) - original.y(i)) > threshold ? 1 : 0;
  }
  return q;
}

// Fills the perturbation seeds of one sample. The default draws i.i.d.
// Bernoulli(perturb_prob) from the stream keyed by (rng_seed, t, sample).
using SeedSampler = std::function<void(int t, int sample, std::span<std::uint8_t> seeds)>;

inline SeedSampler bernoulli_sampler(const PerturbationConfig& cfg) {
  return [seed = cfg.rng_seed, p = cfg.perturb_prob](int t, int sample, std::span<std::uint8_t> out) {
    auto stream = keyed_stream(seed, static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(sample));
    for (auto& s : out) s = stream.bernoulli(p) ? 1 : 0;
  };
}

namespace detail {

inline std::vector<int> normalized_variables(std::vector<int> variables, int target, int n_nodes) {
  std::sort(variables.begin(), variables.end());
  variables.erase(std::unique(variables.begin(), variables.end()), variables.end());
  if (variables.empty()) throw ValueError("variable set is empty");
  for (int v : variables) {
    if (v < 0 || v >= n_nodes) throw IndexError("variable node " + std::to_string(v) + " out of range");
  }
  if (!std::binary_search(variables.begin(), variables.end(), target)) {
    throw ValueError("target " + std::to_string(target) + " is not among the variables");
  }
  return variables;
}

inline void check_window(const TemporalGraph& g, int t, int window) {
  if (t < 0 || t + window - 1 >= g.steps()) {
    throw RangeError("snapshot " + std::to_string(t) + " with window " + std::to_string(window) +
                     " does not fit in " + std::to_string(g.steps()) + " feature steps");
  }
}

}  // namespace detail

// Perturbation data for the prediction made from steps [t, t + window - 1].
// The hidden state is computed once from the unperturbed inputs and then held
// fixed while the last frame is perturbed.
inline SnapshotDataset generate_snapshot_dataset(ModelOracle& oracle, const TemporalGraph& g, int t, int target,
                                                 std::vector<int> variables, const PerturbationConfig& cfg,
                                                 const TimeWindow& interval, const SeedSampler& sampler = {}) {
  cfg.validate();
  const OracleInfo info = oracle.info();
  if (info.n_nodes != g.n_nodes()) throw DimensionError("oracle node count does not match graph");
  const int window = info.window;
  detail::check_window(g, t, window);
  detail::check_window(g, interval.end, window);
  if (interval.start < 0 || interval.start > interval.end) throw RangeError("invalid interval");

  SnapshotDataset d;
  d.t = t;
  d.target = target;
  d.variables = detail::normalized_variables(std::move(variables), target, g.n_nodes());
  d.num_samples = cfg.num_samples;
  const size_t nv = d.variables.size();
  d.realizations.assign(nv * static_cast<size_t>(cfg.num_samples), 0);
  d.seeds.assign(nv * static_cast<size_t>(cfg.num_samples), 0);

  std::span<const Matrix> x_seq(g.features().data() + t, static_cast<size_t>(window));
  const Matrix& x_last = x_seq.back();
  const Matrix replacement = cfg.mode == PerturbMode::MeanReplace
                                 ? replacement_values(g, interval, window)
                                 : Matrix::Zero(g.n_nodes(), g.feature_dim());
  const HiddenState h = oracle.hidden_state(x_seq);
  const Prediction original = oracle.predict_with_hidden(x_last, h);

  const SeedSampler& draw = sampler ? sampler : bernoulli_sampler(cfg);
  std::vector<std::uint8_t> s(nv);
  for (int sample = 0; sample < cfg.num_samples; ++sample) {
    draw(t, sample, s);
    const Matrix x = perturb_features(x_last, d.variables, s, cfg.mode, replacement);
    const auto q = prediction_changed(original, oracle.predict_with_hidden(x, h), cfg.change_threshold);
    for (size_t i = 0; i < nv; ++i) {
      const size_t at = static_cast<size_t>(sample) * nv + i;
      d.seeds[at] = s[i];
      d.realizations[at] = static_cast<std::uint8_t>(s[i] + q[static_cast<size_t>(d.variables[i])]);
    }
  }
  return d;
}

inline TemporalDataset generate_temporal_dataset(ModelOracle& oracle, const TemporalGraph& g,
                                                 const TimeWindow& interval, int target,
                                                 const std::vector<int>& variables, const PerturbationConfig& cfg,
                                                 const SeedSampler& sampler = {}) {
  const int window = oracle.info().window;
  if (interval.start < 0 || interval.start > interval.end || interval.end + window - 1 >= g.steps()) {
    throw RangeError("interval [" + std::to_string(interval.start) + "," + std::to_string(interval.end) +
                     "] cannot host a model window of " + std::to_string(window) + " within " +
                     std::to_string(g.steps()) + " feature steps");
  }
  TemporalDataset data;
  data.interval = interval;
  data.target = target;
  data.variables = detail::normalized_variables(variables, target, g.n_nodes());
  for (int t = interval.start; t <= interval.end; ++t) {
    data.snapshots.push_back(generate_snapshot_dataset(oracle, g, t, target, data.variables, cfg, interval, sampler));
  }
  return data;
}

// Default candidate variables: the target and its 2-hop neighborhood.
inline std::vector<int> default_variables(const TemporalGraph& g, int target) {
  auto v = k_hop_neighbors(g, target, 2);
  v.push_back(target);
  std::sort(v.begin(), v.end());
  return v;
}

// --- serialization -----------------------------------------------------------

inline std::string snapshot_csv(const SnapshotDataset& d, bool seeds = false) {
  std::string out;
  for (size_t i = 0; i < d.variables.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(d.variables[i]);
  }
  out += '\n';
  const auto& cells = seeds ? d.seeds : d.realizations;
  for (int s = 0; s < d.num_samples; ++s) {
    for (size_t i = 0; i < d.variables.size(); ++i) {
      if (i) out += ',';
      out += static_cast<char>('0' + cells[static_cast<size_t>(s) * d.variables.size() + i]);
    }
    out += '\n';
  }
  return out;
}

inline std::string snapshot_metadata(const SnapshotDataset& d, const PerturbationConfig& cfg) {
  nlohmann::ordered_json j;
  j["t"] = d.t;
  j["target"] = d.target;
  j["variables"] = d.variables;
  j["num_samples"] = d.num_samples;
  j["config"] = {{"num_samples", cfg.num_samples},
                 {"perturb_prob", cfg.perturb_prob},
                 {"change_threshold", cfg.change_threshold},
                 {"mode", to_string(cfg.mode)},
                 {"rng_seed", cfg.rng_seed}};
  return j.dump(1) + "\n";
}

// Writes snapshot_<t>.csv, snapshot_<t>.seeds.csv and snapshot_<t>.json into `dir`.
inline void save_snapshot(const SnapshotDataset& d, const PerturbationConfig& cfg, const std::filesystem::path& dir) {
  const std::string stem = "snapshot_" + std::to_string(d.t);
  csv::write_atomic(dir / (stem + ".csv"), snapshot_csv(d));
  csv::write_atomic(dir / (stem + ".seeds.csv"), snapshot_csv(d, true));
  csv::write_atomic(dir / (stem + ".json"), snapshot_metadata(d, cfg));
}

namespace detail {

inline std::vector<std::uint8_t> read_cells(const std::filesystem::path& path, const std::vector<int>& variables,
                                            int num_samples, int max_value) {
  auto lines = csv::split_lines(csv::read_file(path));
  while (!lines.empty() && csv::trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw ParseError(path.string() + ": missing header row");
  auto header = csv::split_fields(lines[0]);
  if (header.size() != variables.size()) throw DimensionError(path.string() + ": header does not match variables");
  for (size_t i = 0; i < header.size(); ++i) {
    if (csv::parse_double(header[i], path.string() + ":1") != variables[i]) {
      throw DimensionError(path.string() + ": header does not match variables");
    }
  }
  if (lines.size() - 1 != static_cast<size_t>(num_samples)) throw DimensionError(path.string() + ": wrong row count");
  std::vector<std::uint8_t> cells;
  cells.reserve(variables.size() * static_cast<size_t>(num_samples));
  for (size_t r = 1; r < lines.size(); ++r) {
    auto fields = csv::split_fields(lines[r]);
    if (fields.size() != variables.size()) throw DimensionError(path.string() + ": ragged row " + std::to_string(r + 1));
    for (auto f : fields) {
      f = csv::trim(f);
      if (f.size() != 1 || f[0] < '0' || f[0] > '0' + max_value) {
        throw ParseError(path.string() + ": bad cell '" + std::string(f) + "' on row " + std::to_string(r + 1));
      }
      cells.push_back(static_cast<std::uint8_t>(f[0] - '0'));
    }
  }
  return cells;
}

}  // namespace detail

inline SnapshotDataset load_snapshot(const std::filesystem::path& dir, int t) {
  const std::string stem = "snapshot_" + std::to_string(t);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(csv::read_file(dir / (stem + ".json")));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(stem + ".json: " + e.what());
  }
  SnapshotDataset d;
  d.t = meta.at("t").get<int>();
  d.target = meta.at("target").get<int>();
  d.variables = meta.at("variables").get<std::vector<int>>();
  d.num_samples = meta.at("num_samples").get<int>();
  d.realizations = detail::read_cells(dir / (stem + ".csv"), d.variables, d.num_samples, 2);
  if (std::filesystem::exists(dir / (stem + ".seeds.csv"))) {
    d.seeds = detail::read_cells(dir / (stem + ".seeds.csv"), d.variables, d.num_samples, 1);
  }
  return d;
}

inline TemporalDataset load_temporal_dataset(const std::filesystem::path& dir, const TimeWindow& interval) {
  TemporalDataset data;
  data.interval = interval;
  for (int t = interval.start; t <= interval.end; ++t) {
    data.snapshots.push_back(load_snapshot(dir, t));
    const auto& s = data.snapshots.back();
    if (t == interval.start) {
      data.target = s.target;
      data.variables = s.variables;
    } else if (s.variables != data.variables || s.target != data.target) {
      throw DimensionError("snapshot " + std::to_string(t) + " disagrees on variables or target");
    }
  }
  return data;
}

}  // namespace tgx
