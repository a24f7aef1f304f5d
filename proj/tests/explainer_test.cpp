#include <set>

#include <gtest/gtest.h>

#include "tgx/explainer.hpp"
#include "tgx/instances.hpp"
#include "tgx/synth.hpp"

using namespace tgx;

namespace {

SnapshotDataset independent_data(int nv, int n, std::uint64_t seed) {
  SnapshotDataset d;
  for (int v = 0; v < nv; ++v) d.variables.push_back(v);
  d.num_samples = n;
  SplitMix64 gen(seed);
  for (int i = 0; i < nv * n; ++i) d.realizations.push_back(static_cast<std::uint8_t>(gen.below(3)));
  d.seeds.assign(d.realizations.size(), 0);
  return d;
}

std::vector<BayesianNetwork> all_dags3() {
  std::vector<Edge> pairs{{0, 1}, {1, 0}, {0, 2}, {2, 0}, {1, 2}, {2, 1}};
  std::vector<BayesianNetwork> out;
  for (int mask = 0; mask < 64; ++mask) {
    std::vector<Edge> edges;
    for (int i = 0; i < 6; ++i)
      if (mask >> i & 1) edges.push_back(pairs[static_cast<size_t>(i)]);
    if (is_acyclic({0, 1, 2}, edges)) out.emplace_back(std::vector<int>{0, 1, 2}, 0, edges);
  }
  return out;
}

std::set<std::pair<int, int>> skeleton(const BayesianNetwork& b) {
  std::set<std::pair<int, int>> s;
  for (auto [p, c] : b.edges()) s.insert({std::min(p, c), std::max(p, c)});
  return s;
}

// Colliders a -> c <- b with a and b non-adjacent.
std::set<std::tuple<int, int, int>> v_structures(const BayesianNetwork& b) {
  std::set<std::tuple<int, int, int>> out;
  const auto sk = skeleton(b);
  for (int c : b.variables()) {
    const auto pa = b.parents(c);
    for (size_t i = 0; i < pa.size(); ++i)
      for (size_t j = i + 1; j < pa.size(); ++j)
        if (!sk.count({pa[i], pa[j]})) out.insert({pa[i], c, pa[j]});
  }
  return out;
}

}  // namespace

// Oracle: chi-square as sum(O^2 / E) - n, algebraically equal to sum((O - E)^2 / E).
TEST(ChiSquare, MatchesAlternativeForm) {
  const auto d = markov_chain_snapshot(3, 500, 0.4, 3);
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      double table[3][3] = {}, row[3] = {}, col[3] = {};
      for (int s = 0; s < d.num_samples; ++s) {
        table[d.value(s, a)][d.value(s, b)] += 1;
        row[d.value(s, a)] += 1;
        col[d.value(s, b)] += 1;
      }
      double sum = 0.0;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          if (row[i] * col[j] > 0) sum += table[i][j] * table[i][j] / (row[i] * col[j] / d.num_samples);
      EXPECT_NEAR(chi_square(d, a, b), sum - d.num_samples, 1e-8);
    }
  }
}

TEST(ChiSquare, PerfectDependenceOnTwoByTwo) {
  SnapshotDataset d;
  d.variables = {0, 1};
  d.num_samples = 4;
  d.realizations = {0, 0, 0, 0, 2, 2, 2, 2};
  d.seeds.assign(8, 0);
  // 2x2 diagonal table with n = 4 gives chi-square n * (k - 1) = 4.
  EXPECT_DOUBLE_EQ(chi_square(d, 0, 1), 4.0);
}

TEST(SelectVariables, KeepsTargetAndStrongestDependents) {
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    // Column 1 follows the target, columns 2..5 are noise.
    SnapshotDataset d = independent_data(6, 1000, seed);
    SplitMix64 gen(seed + 1000);
    for (int s = 0; s < d.num_samples; ++s)
      if (gen.bernoulli(0.3)) d.realizations[static_cast<size_t>(s) * 6 + 1] = d.realizations[static_cast<size_t>(s) * 6];
    if (select_variables(d, 0, 2) == std::vector<int>{0, 1}) ++hits;
  }
  EXPECT_GE(hits, 95);
}

TEST(SelectVariables, EdgeCases) {
  SnapshotDataset d = independent_data(4, 50, 1);
  EXPECT_THROW(select_variables(d, 0, 1), ValueError);
  EXPECT_EQ(select_variables(d, 0, 4), d.variables);
  EXPECT_EQ(select_variables(d, 0, 10), d.variables);
  EXPECT_THROW(select_variables(d, 9, 2), MissingVariableError);
  // Constant columns never qualify, even with budget to spare.
  for (int s = 0; s < d.num_samples; ++s) {
    d.realizations[static_cast<size_t>(s) * 4 + 2] = 0;
    d.realizations[static_cast<size_t>(s) * 4 + 3] = 1;
  }
  EXPECT_EQ(select_variables(d, 0, 3), (std::vector<int>{0, 1}));
  // Equal statistics: lower node index wins.
  SnapshotDataset twin = independent_data(2, 50, 2);
  SnapshotDataset wide;
  wide.variables = {0, 4, 7};
  wide.num_samples = 50;
  for (int s = 0; s < 50; ++s) {
    wide.realizations.push_back(twin.value(s, 0));
    wide.realizations.push_back(twin.value(s, 1));
    wide.realizations.push_back(twin.value(s, 1));
  }
  wide.seeds.assign(wide.realizations.size(), 0);
  EXPECT_EQ(select_variables(wide, 0, 2), (std::vector<int>{0, 4}));
}

TEST(LearnStructure, IndependentDataGivesEmptyGraph) {
  int empty = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto d = independent_data(4, 1000, seed);
    if (learn_structure(d, d.variables).edges().empty()) ++empty;
  }
  EXPECT_GE(empty, 99);
}

// Oracle: exhaustive enumeration of all 25 DAGs over three variables.
TEST(LearnStructure, ChainMatchesExhaustiveOptimum) {
  const auto dags = all_dags3();
  ASSERT_EQ(dags.size(), 25u);
  int recovered = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto d = markov_chain_snapshot(3, 2000, 0.5, seed);
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& b : dags) best = std::max(best, bic_score(b, d));
    const auto learned = learn_structure(d, d.variables);
    EXPECT_NEAR(bic_score(learned, d), best, 1e-9) << "seed " << seed;
    const BayesianNetwork planted({0, 1, 2}, 0, {{0, 1}, {1, 2}});
    if (skeleton(learned) == skeleton(planted) && v_structures(learned) == v_structures(planted)) ++recovered;
  }
  EXPECT_GE(recovered, 95);
}

TEST(LearnStructure, RespectsParentLimit) {
  // Node 3 copies one of three parents: all three are informative.
  SnapshotDataset d = independent_data(4, 3000, 5);
  SplitMix64 gen(17);
  for (int s = 0; s < d.num_samples; ++s) {
    const auto pick = static_cast<size_t>(gen.below(3));
    d.realizations[static_cast<size_t>(s) * 4 + 3] = d.realizations[static_cast<size_t>(s) * 4 + pick];
  }
  for (int limit = 1; limit <= 3; ++limit) {
    const auto b = learn_structure(d, d.variables, limit);
    for (int v : b.variables()) EXPECT_LE(static_cast<int>(b.parents(v).size()), limit);
    EXPECT_TRUE(is_acyclic(b.variables(), b.edges()));
  }
  EXPECT_THROW(learn_structure(d, d.variables, 0), ValueError);
}

TEST(LearnStructure, Deterministic) {
  const auto d = markov_chain_snapshot(5, 800, 0.4, 9);
  EXPECT_TRUE(learn_structure(d, d.variables) == learn_structure(d, d.variables));
  EXPECT_EQ(learn_structure(d, d.variables).snapshot, d.t);
}

TEST(Explain, DefaultBudget) {
  SynthSpec spec;
  const auto g = synth_dataset(spec);
  EXPECT_EQ(default_max_variables(g, 0), static_cast<int>(k_hop_neighbors(g, 0, 2).size()) + 1);
  spec.n_nodes = 30;
  spec.extra_edges = 60;
  const auto dense = synth_dataset(spec);
  EXPECT_EQ(default_max_variables(dense, 0), 12);
}

// Inside the planted window the influencer must appear in the explanation;
// outside it every candidate is inert and the explanation has no edges.
TEST(Explain, PlantedInfluencerRecovered) {
  int inside = 0, outside = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    SynthSpec spec;
    spec.seed = seed;
    const auto g = synth_dataset(spec);
    EmbeddedOracle oracle(synth_model_card(spec, g), normalize_adjacency(g));
    PerturbationConfig cfg;
    cfg.rng_seed = seed;
    ExplainOptions opts;
    opts.max_variables = default_max_variables(g, spec.target);
    const TimeWindow interval{0, spec.steps - 1};
    const auto vars = default_variables(g, spec.target);
    const auto in = explain_snapshot(oracle, g, 15, spec.target, vars, cfg, opts, interval).network;
    const auto out = explain_snapshot(oracle, g, 30, spec.target, vars, cfg, opts, interval).network;
    const bool touches = std::any_of(in.edges().begin(), in.edges().end(), [&](const Edge& e) {
      return e.first == spec.influencer || e.second == spec.influencer;
    });
    inside += touches;
    outside += out.edges().empty();
  }
  EXPECT_GE(inside, 80);
  EXPECT_GE(outside, 80);
}
