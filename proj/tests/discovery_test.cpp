#include <set>

#include <gtest/gtest.h>

#include "tgx/discovery.hpp"
#include "tgx/instances.hpp"
#include "tgx/report.hpp"

using namespace tgx;

namespace {

using RecordKey = std::tuple<std::string, int, int>;

std::set<RecordKey> keys(const DominantSet& s) {
  std::set<RecordKey> out;
  for (const auto& r : s.records) out.insert({canonical_form(r.network), r.window.start, r.window.end});
  return out;
}

// Independent reference: every (candidate, window) scored directly from the
// datasets, then filtered to windows not strictly inside another interesting one.
std::set<RecordKey> reference_dominant(const CandidateSet& cands, const TemporalDataset& data, double threshold) {
  std::vector<std::pair<const Candidate*, TimeWindow>> interesting;
  for (const auto& c : cands)
    for (int s = data.interval.start; s <= data.interval.end; ++s)
      for (int e = s; e <= data.interval.end; ++e)
        if (normalized_tbic_gains(c.network, data, {s, e}) > threshold) interesting.push_back({&c, {s, e}});
  std::set<RecordKey> out;
  for (const auto& [c, w] : interesting) {
    bool inside = false;
    for (const auto& other : interesting) inside = inside || (other.second.contains(w) && !(other.second == w));
    if (!inside) out.insert({canonical_form(c->network), w.start, w.end});
  }
  return out;
}

// Threshold at a seed-dependent quantile of all window scores.
double quantile_threshold(const CandidateSet& cands, const TemporalDataset& data, double q) {
  InterestScorer score(cands, data);
  std::vector<double> all;
  for (size_t c = 0; c < cands.size(); ++c)
    for (int s = data.interval.start; s <= data.interval.end; ++s)
      for (int e = s; e <= data.interval.end; ++e) all.push_back(score(c, {s, e}));
  std::sort(all.begin(), all.end());
  return all[static_cast<size_t>(q * static_cast<double>(all.size() - 1))];
}

InstanceSpec instance(std::uint64_t seed) {
  SplitMix64 gen(seed);
  InstanceSpec spec;
  spec.snapshots = 1 + static_cast<int>(gen.below(12));
  spec.candidates = 1 + static_cast<int>(gen.below(5));
  spec.variables = 3 + static_cast<int>(gen.below(2));
  spec.samples = 150;
  spec.seed = seed;
  return spec;
}

}  // namespace

TEST(Tbic, SingletonWindowIsSnapshotScore) {
  InstanceSpec spec{6, 4, 200, 3, 1};
  const auto data = random_temporal_dataset(spec);
  const auto cands = random_candidates(spec);
  for (const auto& c : cands)
    for (int t = 0; t < spec.snapshots; ++t)
      EXPECT_DOUBLE_EQ(tbic(c.network, data, {t, t}), bic_score(c.network, data.at(t)));
}

TEST(Tbic, EdgelessNetworkHasZeroNormalizedScore) {
  InstanceSpec spec{6, 4, 200, 3, 2};
  const auto data = random_temporal_dataset(spec);
  const BayesianNetwork b0(data.variables, 0);
  for (int s = 0; s < 6; ++s)
    for (int e = s; e < 6; ++e) {
      EXPECT_EQ(normalized_tbic(b0, data, {s, e}), 0.0);
      EXPECT_EQ(normalized_tbic_gains(b0, data, {s, e}), 0.0);
    }
}

TEST(Tbic, MeanOfGainsEqualsDifferenceOfMeans) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto spec = instance(seed);
    const auto data = random_temporal_dataset(spec);
    for (const auto& c : random_candidates(spec)) {
      for (int s = 0; s < spec.snapshots; ++s)
        for (int e = s; e < spec.snapshots; ++e)
          EXPECT_NEAR(normalized_tbic(c.network, data, {s, e}), normalized_tbic_gains(c.network, data, {s, e}), 1e-12);
    }
  }
}

TEST(Tbic, WindowOutsideIntervalRejected) {
  InstanceSpec spec{4, 3, 50, 1, 0};
  const auto data = random_temporal_dataset(spec);
  const auto cands = random_candidates(spec);
  EXPECT_THROW(tbic(cands[0].network, data, {2, 4}), RangeError);
  EXPECT_THROW(tbic(cands[0].network, data, {3, 2}), RangeError);
  InterestScorer score(cands, data);
  EXPECT_THROW(score(0, {-1, 1}), RangeError);
}

TEST(Interest, StrictThreshold) {
  EXPECT_FALSE(is_interesting(5.0, 5.0).interesting);
  EXPECT_TRUE(is_interesting(5.0 + 1e-9, 5.0).interesting);
}

TEST(Windows, Children) {
  EXPECT_TRUE(window_children({3, 3}).empty());
  const auto c = window_children({2, 5});
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0], (TimeWindow{3, 5}));
  EXPECT_EQ(c[1], (TimeWindow{2, 4}));
}

TEST(Candidates, DeduplicateKeepingEarliestOrigin) {
  BayesianNetwork a({0, 1}, 0, {{0, 1}}), b({0, 1}, 0, {{1, 0}}), a2 = a;
  a.snapshot = 5;
  b.snapshot = 2;
  a2.snapshot = 3;
  const auto set = CandidateSet::from_networks({a, b, a2});
  ASSERT_EQ(set.size(), 2u);
  EXPECT_EQ(set[0].origin, 2);
  EXPECT_TRUE(set[0].network == b);
  EXPECT_EQ(set[1].origin, 3);
}

TEST(Discovery, PruneMatchesBruteForceAndReference) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto spec = instance(seed);
    const auto data = random_temporal_dataset(spec);
    const auto cands = random_candidates(spec);
    const double threshold = quantile_threshold(cands, data, 0.3 + 0.6 * static_cast<double>(seed % 7) / 6.0);
    InterestScorer s1(cands, data), s2(cands, data);
    const auto brute = brute_force_discover(s1, threshold);
    const auto pruned = prune_discover(s2, threshold);
    const auto expected = reference_dominant(cands, data, threshold);
    EXPECT_EQ(keys(brute), expected) << "seed " << seed;
    EXPECT_EQ(keys(pruned), expected) << "seed " << seed;
    EXPECT_LE(pruned.score_evaluations, brute.score_evaluations);
    for (const auto& r : pruned.records) EXPECT_GT(r.f_value, threshold);
  }
}

TEST(Discovery, FirstMatchKeepsWindowsAndLowestCandidate) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto spec = instance(seed);
    const auto data = random_temporal_dataset(spec);
    const auto cands = random_candidates(spec);
    const double threshold = quantile_threshold(cands, data, 0.5);
    InterestScorer s1(cands, data), s2(cands, data);
    const auto full = prune_discover(s1, threshold, PruneMode::Exhaustive);
    const auto first = prune_discover(s2, threshold, PruneMode::FirstMatch);
    std::map<TimeWindow, size_t> lowest;
    for (const auto& r : full.records) {
      auto [it, fresh] = lowest.emplace(r.window, r.candidate);
      if (!fresh) it->second = std::min(it->second, r.candidate);
    }
    ASSERT_EQ(first.records.size(), lowest.size());
    for (const auto& r : first.records) EXPECT_EQ(lowest.at(r.window), r.candidate);
    EXPECT_EQ(first.windows_evaluated, full.windows_evaluated);
  }
}

TEST(Discovery, CostEndpoints) {
  for (int L : {1, 2, 5, 12}) {
    InstanceSpec spec{L, 4, 100, 4, static_cast<std::uint64_t>(L)};
    const auto data = random_temporal_dataset(spec);
    const auto cands = random_candidates(spec);
    const auto k = static_cast<std::int64_t>(cands.size());
    const std::int64_t all = k * L * (L + 1) / 2;

    InterestScorer a(cands, data), b(cands, data);
    const auto best = prune_discover(a, std::numeric_limits<double>::lowest());
    EXPECT_EQ(best.windows_evaluated, 1);
    EXPECT_LE(best.score_evaluations, k);
    EXPECT_EQ(brute_force_discover(b, std::numeric_limits<double>::lowest()).score_evaluations, all);

    InterestScorer c(cands, data), d(cands, data);
    const auto worst_prune = prune_discover(c, std::numeric_limits<double>::max());
    const auto worst_brute = brute_force_discover(d, std::numeric_limits<double>::max());
    EXPECT_TRUE(worst_prune.records.empty());
    EXPECT_EQ(worst_prune.score_evaluations, all);
    EXPECT_EQ(worst_brute.score_evaluations, all);
    EXPECT_EQ(worst_prune.windows_evaluated, static_cast<std::int64_t>(L) * (L + 1) / 2);
  }
}

TEST(Discovery, RawMeasureUsesTbic) {
  InstanceSpec spec{5, 3, 120, 2, 4};
  const auto data = random_temporal_dataset(spec);
  const auto cands = random_candidates(spec);
  InterestScorer raw(cands, data, InterestMeasure::Raw);
  EXPECT_NEAR(raw(1, {1, 3}), tbic(cands[1].network, data, {1, 3}), 1e-9);
}

TEST(Report, DominantReportSeparatesInstrumentation) {
  InstanceSpec spec{8, 4, 150, 3, 6};
  const auto data = random_temporal_dataset(spec);
  const auto cands = random_candidates(spec);
  DiscoverySettings s;
  s.threshold = quantile_threshold(cands, data, 0.7);
  s.prune = false;
  auto a = nlohmann::json::parse(dominant_report(discover(cands, data, s), cands, s));
  s.prune = true;
  auto b = nlohmann::json::parse(dominant_report(discover(cands, data, s), cands, s));
  EXPECT_EQ(a["instrumentation"]["method"], "brute-force");
  EXPECT_EQ(b["instrumentation"]["method"], "prune");
  a.erase("instrumentation");
  b.erase("instrumentation");
  EXPECT_EQ(a, b);
  EXPECT_THROW(discover(CandidateSet{}, data, s), ValueError);
}

TEST(Report, GainSeriesMatchesSnapshotGains) {
  InstanceSpec spec{3, 3, 100, 2, 8};
  const auto data = random_temporal_dataset(spec);
  const auto cands = random_candidates(spec);
  const auto lines = csv::split_lines(gain_series_csv(cands, data));
  EXPECT_EQ(lines[0], "t,candidate_0,candidate_1");
  const auto fields = csv::split_fields(lines[2]);
  EXPECT_EQ(csv::parse_double(fields[2], "gain"), snapshot_gain(cands[1].network, data.at(1)));
}
