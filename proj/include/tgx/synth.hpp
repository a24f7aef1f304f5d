#pragma once

#include <cmath>
#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "tgx/model.hpp"
#include "tgx/rng.hpp"
#include "tgx/temporal_graph.hpp"

namespace tgx {

// Desk-scale stand-in for a road network with a trained forecaster. One
// neighbour of the target (the influencer) deviates from its long-run mean
// only while the planted window is active; every other candidate variable
// sits at its mean, so perturbing it is a no-op under mean replacement.
struct SynthSpec {
  int n_nodes = 8;
  int steps = 40;  // explained snapshots, t = 0 .. steps-1
  int window = 4;  // model input length T
  int hidden_dim = 6;
  std::uint64_t seed = 1;
  int target = 0;
  int influencer = 1;
  TimeWindow planted{10, 20};
  double amplitude = 1.0;
  int extra_edges = 0;
  // Smallest prediction change the influencer must cause at its candidate
  // neighbours during the planted window; weights are redrawn until it does.
  double min_planted_change = 0.05;

  int feature_steps() const { return steps + window - 1; }

  void validate() const {
    if (n_nodes < 3 || steps < 1 || window < 1 || hidden_dim < 1) throw ValueError("synthetic sizes too small");
    if (target < 0 || target >= n_nodes || influencer < 0 || influencer >= n_nodes || target == influencer) {
      throw IndexError("target/influencer out of range");
    }
    if (planted.start < 0 || planted.end >= steps || planted.start > planted.end) {
      throw RangeError("planted window outside the explained interval");
    }
  }
};

inline Matrix synth_adjacency(const SynthSpec& spec) {
  const int n = spec.n_nodes;
  Matrix a = Matrix::Zero(n, n);
  auto link = [&](int i, int j) {
    if (i != j) a(i, j) = a(j, i) = 1.0;
  };
  for (int i = 0; i < n; ++i) link(i, (i + 1) % n);
  link(spec.target, spec.influencer);
  SplitMix64 gen(mix64(spec.seed) ^ 0xa5a5a5a5ULL);
  for (int e = 0; e < spec.extra_edges; ++e) {
    link(static_cast<int>(gen.below(static_cast<std::uint64_t>(n))), static_cast<int>(gen.below(static_cast<std::uint64_t>(n))));
  }
  return a;
}

inline TemporalGraph synth_dataset(const SynthSpec& spec) {
  spec.validate();
  const Matrix a = synth_adjacency(spec);
  const int total = spec.feature_steps();
  SplitMix64 gen(mix64(spec.seed) ^ 0x5eedULL);

  auto near_target = k_hop_neighbors(a, spec.target, 2);
  near_target.push_back(spec.target);
  auto is_candidate = [&](int v) { return std::find(near_target.begin(), near_target.end(), v) != near_target.end(); };

  std::vector<Matrix> frames(static_cast<size_t>(total), Matrix::Zero(spec.n_nodes, 1));
  for (int v = 0; v < spec.n_nodes; ++v) {
    const double base = 0.3 + 0.4 * gen.uniform();
    if (v == spec.influencer) {
      // Active steps are the last inputs of the planted snapshots.
      const int first = spec.planted.start + spec.window - 1, last = spec.planted.end + spec.window - 1;
      double active_sum = 0.0;
      for (int s = first; s <= last; ++s) {
        const double sign = (s - first) % 2 == 0 ? 1.0 : -1.0;
        const double value = base + sign * spec.amplitude * (0.75 + 0.5 * gen.uniform());
        frames[static_cast<size_t>(s)](v, 0) = value;
        active_sum += value;
      }
      // Quiet steps sit at the mean of the active ones, which makes that
      // value the series mean as well.
      const double quiet = active_sum / (last - first + 1);
      for (int s = 0; s < total; ++s)
        if (s < first || s > last) frames[static_cast<size_t>(s)](v, 0) = quiet;
    } else if (is_candidate(v)) {
      for (int s = 0; s < total; ++s) frames[static_cast<size_t>(s)](v, 0) = base;
    } else {
      const double phase = 2.0 * std::numbers::pi * gen.uniform();
      for (int s = 0; s < total; ++s) {
        frames[static_cast<size_t>(s)](v, 0) =
            base + 0.2 * std::sin(2.0 * std::numbers::pi * s / 24.0 + phase) + 0.05 * (gen.uniform() - 0.5);
      }
    }
  }
  std::vector<std::string> labels;
  for (int v = 0; v < spec.n_nodes; ++v) labels.push_back("road" + std::to_string(v));
  return TemporalGraph(a, std::move(frames), std::move(labels));
}

// Smallest |prediction change| that replacing the influencer's last input by
// its mean causes at the target or the influencer's candidate neighbours,
// over the planted snapshots.
inline double planted_change(const SynthSpec& spec, const TemporalGraph& g, const ModelCard& card) {
  const NormalizedAdjacency a = normalize_adjacency(g);
  const Matrix mean = temporal_mean(g, 0, spec.feature_steps() - 1);
  auto watched = k_hop_neighbors(g, spec.influencer, 1);
  auto near_target = k_hop_neighbors(g, spec.target, 2);
  std::erase_if(watched, [&](int v) {
    return v != spec.target && std::find(near_target.begin(), near_target.end(), v) == near_target.end();
  });
  double smallest = std::numeric_limits<double>::infinity();
  for (int t = spec.planted.start; t <= spec.planted.end; ++t) {
    std::span<const Matrix> x_seq(g.features().data() + t, static_cast<size_t>(spec.window));
    const HiddenState h = hidden_state(card.weights, a, x_seq);
    const Prediction y0 = predict_with_hidden(card.weights, a, x_seq.back(), h);
    Matrix x = x_seq.back();
    x.row(spec.influencer) = mean.row(spec.influencer);
    const Prediction y1 = predict_with_hidden(card.weights, a, x, h);
    for (int v : watched) smallest = std::min(smallest, std::abs(y1.y(v) - y0.y(v)));
  }
  return smallest;
}

// Draws weight sets from the seed's stream until the planted dependency is
// visible to the explainer at every planted snapshot.
inline ModelCard synth_model_card(const SynthSpec& spec, const TemporalGraph& g) {
  ModelCard card;
  card.name = "tgcn-synth";
  card.n_nodes = spec.n_nodes;
  card.window = spec.window;
  for (std::uint64_t attempt = 0; attempt < 10000; ++attempt) {
    card.weights = synth_model(1, spec.hidden_dim, mix64(spec.seed ^ 0x3e3e3eULL) + attempt);
    if (planted_change(spec, g, card) >= spec.min_planted_change) return card;
  }
  throw ValueError("no weight draw realizes the planted dependency; raise the amplitude");
}

inline nlohmann::ordered_json synth_manifest(const SynthSpec& spec) {
  nlohmann::ordered_json j;
  j["seed"] = spec.seed;
  j["n_nodes"] = spec.n_nodes;
  j["steps"] = spec.steps;
  j["feature_steps"] = spec.feature_steps();
  j["window"] = spec.window;
  j["hidden_dim"] = spec.hidden_dim;
  j["target"] = spec.target;
  j["influencer"] = spec.influencer;
  j["planted_window"] = {spec.planted.start, spec.planted.end};
  j["amplitude"] = spec.amplitude;
  j["min_planted_change"] = spec.min_planted_change;
  return j;
}

}  // namespace tgx
