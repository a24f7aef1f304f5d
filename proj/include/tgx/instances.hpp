#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "tgx/bayesnet.hpp"
#include "tgx/discovery.hpp"
#include "tgx/rng.hpp"

namespace tgx {

// Random discovery instances built directly in dataset space (no model):
// each snapshot plants a chain 0 -> 1 -> ... whose coupling strength varies
// over time, so candidate networks are interesting on some windows only.
struct InstanceSpec {
  int snapshots = 8;
  int variables = 4;
  int samples = 200;
  int candidates = 3;
  std::uint64_t seed = 0;
};

inline SnapshotDataset planted_chain_snapshot(int t, int num_variables, int samples, double coupling,
                                              std::uint64_t seed) {
  SnapshotDataset d;
  d.t = t;
  d.target = 0;
  for (int v = 0; v < num_variables; ++v) d.variables.push_back(v);
  d.num_samples = samples;
  const auto nv = static_cast<size_t>(num_variables);
  d.realizations.resize(nv * static_cast<size_t>(samples));
  d.seeds.resize(d.realizations.size());
  for (int s = 0; s < samples; ++s) {
    auto stream = keyed_stream(seed, static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(s));
    std::vector<std::uint8_t> seeds(nv);
    for (auto& x : seeds) x = stream.bernoulli(0.2) ? 1 : 0;
    for (size_t v = 0; v < nv; ++v) {
      std::uint8_t q = 0;
      if (v > 0 && seeds[v - 1] && stream.bernoulli(coupling)) q = 1;
      d.seeds[static_cast<size_t>(s) * nv + v] = seeds[v];
      d.realizations[static_cast<size_t>(s) * nv + v] = static_cast<std::uint8_t>(seeds[v] + q);
    }
  }
  return d;
}

// Ternary Markov chain X0 -> X1 -> ... : X0 uniform, each next variable copies
// its predecessor with probability `stay` and is uniform otherwise.
inline SnapshotDataset markov_chain_snapshot(int num_variables, int samples, double stay, std::uint64_t seed) {
  SnapshotDataset d;
  d.target = 0;
  for (int v = 0; v < num_variables; ++v) d.variables.push_back(v);
  d.num_samples = samples;
  SplitMix64 gen(mix64(seed) ^ 0xc4a1ULL);
  for (int s = 0; s < samples; ++s) {
    std::uint8_t prev = 0;
    for (int v = 0; v < num_variables; ++v) {
      const auto x = v > 0 && gen.bernoulli(stay) ? prev : static_cast<std::uint8_t>(gen.below(3));
      d.realizations.push_back(x);
      d.seeds.push_back(x > 0 ? 1 : 0);
      prev = x;
    }
  }
  return d;
}

inline TemporalDataset random_temporal_dataset(const InstanceSpec& spec) {
  SplitMix64 gen(mix64(spec.seed) ^ 0x77ULL);
  TemporalDataset data;
  data.interval = {0, spec.snapshots - 1};
  data.target = 0;
  for (int v = 0; v < spec.variables; ++v) data.variables.push_back(v);
  // A random active stretch with strong coupling, weak elsewhere.
  const int a = static_cast<int>(gen.below(static_cast<std::uint64_t>(spec.snapshots)));
  const int b = static_cast<int>(gen.below(static_cast<std::uint64_t>(spec.snapshots)));
  for (int t = 0; t < spec.snapshots; ++t) {
    const bool active = std::min(a, b) <= t && t <= std::max(a, b);
    const double coupling = active ? 0.5 + 0.5 * gen.uniform() : 0.3 * gen.uniform();
    data.snapshots.push_back(planted_chain_snapshot(t, spec.variables, spec.samples, coupling, spec.seed));
  }
  return data;
}

// Random DAG: edges only from lower to higher variable index.
inline BayesianNetwork random_dag(int num_variables, double edge_prob, SplitMix64& gen) {
  std::vector<int> vars;
  for (int v = 0; v < num_variables; ++v) vars.push_back(v);
  BayesianNetwork b(vars, 0);
  for (int p = 0; p < num_variables; ++p)
    for (int c = p + 1; c < num_variables; ++c)
      if (gen.bernoulli(edge_prob)) b.add_edge(p, c);
  return b;
}

// Distinct random candidates; the first is always the planted chain.
inline CandidateSet random_candidates(const InstanceSpec& spec) {
  SplitMix64 gen(mix64(spec.seed) ^ 0x99ULL);
  std::vector<BayesianNetwork> nets;
  std::vector<int> vars;
  for (int v = 0; v < spec.variables; ++v) vars.push_back(v);
  BayesianNetwork chain(vars, 0);
  for (int v = 1; v < spec.variables; ++v) chain.add_edge(v - 1, v);
  chain.snapshot = 0;
  nets.push_back(chain);
  for (int attempt = 0; static_cast<int>(nets.size()) < spec.candidates && attempt < 1000; ++attempt) {
    auto b = random_dag(spec.variables, 0.4, gen);
    b.snapshot = static_cast<int>(gen.below(static_cast<std::uint64_t>(spec.snapshots)));
    if (std::none_of(nets.begin(), nets.end(), [&](const auto& n) { return n == b; })) nets.push_back(b);
  }
  return CandidateSet::from_networks(nets);
}

}  // namespace tgx
