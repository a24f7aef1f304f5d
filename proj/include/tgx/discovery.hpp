#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <limits>
#include <set>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "tgx/bayesnet.hpp"
#include "tgx/explainer.hpp"
#include "tgx/perturbation.hpp"

namespace tgx {

// --- temporal scores ---------------------------------------------------------

namespace detail {

inline void check_window(const TemporalDataset& data, const TimeWindow& w) {
  if (w.start > w.end || !data.interval.contains(w.start) || !data.interval.contains(w.end)) {
    throw RangeError("window [" + std::to_string(w.start) + "," + std::to_string(w.end) + "] outside data interval [" +
                     std::to_string(data.interval.start) + "," + std::to_string(data.interval.end) + "]");
  }
}

}  // namespace detail

namespace detail {

// Window means are accumulated in extended precision and rounded once, so the
// two normalized forms below agree to well under 1e-12 at realistic BIC magnitudes.
inline long double mean_bic(const BayesianNetwork& b, const TemporalDataset& data, const TimeWindow& w) {
  check_window(data, w);
  long double sum = 0.0L;
  for (int t = w.start; t <= w.end; ++t) sum += bic_score(b, data.at(t));
  return sum / w.length();
}

}  // namespace detail

// Mean per-snapshot BIC of one fixed network over the window.
inline double tbic(const BayesianNetwork& b, const TemporalDataset& data, const TimeWindow& w) {
  return static_cast<double>(detail::mean_bic(b, data, w));
}

// BIC gain of b's edges on one snapshot: score(b) - score(edgeless b).
inline double snapshot_gain(const BayesianNetwork& b, const SnapshotDataset& d) {
  return bic_score(b, d) - bic_score(b.empty_copy(), d);
}

// Normalized TBIC as a difference of means: TBIC(b) - TBIC(b0).
inline double normalized_tbic(const BayesianNetwork& b, const TemporalDataset& data, const TimeWindow& w) {
  return static_cast<double>(detail::mean_bic(b, data, w) - detail::mean_bic(b.empty_copy(), data, w));
}

// Normalized TBIC as the mean of per-snapshot gains. Discovery uses this form.
inline double normalized_tbic_gains(const BayesianNetwork& b, const TemporalDataset& data, const TimeWindow& w) {
  detail::check_window(data, w);
  long double sum = 0.0L;
  for (int t = w.start; t <= w.end; ++t) sum += snapshot_gain(b, data.at(t));
  return static_cast<double>(sum / w.length());
}

struct Interest {
  bool interesting = false;
  double f_value = 0.0;
};

inline Interest is_interesting(double f_value, double threshold) { return {f_value > threshold, f_value}; }

inline Interest is_interesting(const BayesianNetwork& b, const TemporalDataset& data, const TimeWindow& w,
                               double threshold) {
  return is_interesting(normalized_tbic_gains(b, data, w), threshold);
}

// Sub-windows one step shorter: drop the first step, then drop the last.
inline std::vector<TimeWindow> window_children(const TimeWindow& w) {
  if (w.start >= w.end) return {};
  return {TimeWindow{w.start + 1, w.end}, TimeWindow{w.start, w.end - 1}};
}

// --- candidates --------------------------------------------------------------

struct Candidate {
  BayesianNetwork network;
  int origin = 0;
};

// Distinct per-snapshot explanations, ordered by the earliest snapshot that produced each.
class CandidateSet {
public:
  CandidateSet() = default;

  static CandidateSet from_networks(std::vector<BayesianNetwork> networks) {
    std::stable_sort(networks.begin(), networks.end(),
                     [](const auto& a, const auto& b) { return a.snapshot < b.snapshot; });
    CandidateSet out;
    std::unordered_set<std::string> seen;
    for (auto& n : networks) {
      if (seen.insert(canonical_form(n)).second) {
        const int origin = n.snapshot;
        out.items_.push_back({std::move(n), origin});
      }
    }
    return out;
  }

  size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  const Candidate& operator[](size_t i) const { return items_[i]; }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

private:
  std::vector<Candidate> items_;
};

enum class InterestMeasure { Normalized, Raw };

// Window-level interest evaluation with per-snapshot scores cached, so each
// (candidate, window) evaluation costs one pass over the window.
class InterestScorer {
public:
  InterestScorer(const CandidateSet& cands, const TemporalDataset& data,
                 InterestMeasure measure = InterestMeasure::Normalized)
      : cands_(cands), data_(data), measure_(measure),
        cache_(cands.size() * static_cast<size_t>(data.length()), std::numeric_limits<double>::quiet_NaN()) {}

  double operator()(size_t candidate, const TimeWindow& w) {
    detail::check_window(data_, w);
    double sum = 0.0;
    for (int t = w.start; t <= w.end; ++t) sum += snapshot_value(candidate, t);
    return sum / w.length();
  }

  double snapshot_value(size_t candidate, int t) {
    double& slot = cache_[candidate * static_cast<size_t>(data_.length()) + static_cast<size_t>(t - data_.interval.start)];
    if (slot != slot) {
      const auto& b = cands_[candidate].network;
      slot = measure_ == InterestMeasure::Normalized ? snapshot_gain(b, data_.at(t)) : bic_score(b, data_.at(t));
    }
    return slot;
  }

  const CandidateSet& candidates() const { return cands_; }
  const TemporalDataset& data() const { return data_; }

private:
  const CandidateSet& cands_;
  const TemporalDataset& data_;
  InterestMeasure measure_;
  std::vector<double> cache_;
};

// --- discovery ---------------------------------------------------------------

struct InterestRecord {
  size_t candidate = 0;
  BayesianNetwork network;
  TimeWindow window;
  double f_value = 0.0;
};

struct DominantSet {
  std::vector<InterestRecord> records;
  std::int64_t windows_evaluated = 0;
  std::int64_t score_evaluations = 0;
};

namespace detail {

inline void sort_records(std::vector<InterestRecord>& records) {
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    if (a.window.start != b.window.start) return a.window.start < b.window.start;
    if (a.window.end != b.window.end) return a.window.end < b.window.end;
    return a.candidate < b.candidate;
  });
}

}  // namespace detail

// Scores every candidate on every window of the interval, then drops records
// whose window is a strict sub-window of any other interesting record's window.
inline DominantSet brute_force_discover(InterestScorer& score, double threshold) {
  const auto& cands = score.candidates();
  const TimeWindow full = score.data().interval;
  DominantSet out;
  std::vector<InterestRecord> interesting;
  for (size_t c = 0; c < cands.size(); ++c) {
    for (int s = full.start; s <= full.end; ++s) {
      for (int e = s; e <= full.end; ++e) {
        const TimeWindow w{s, e};
        ++out.score_evaluations;
        const auto res = is_interesting(score(c, w), threshold);
        if (res.interesting) interesting.push_back({c, cands[c].network, w, res.f_value});
      }
    }
  }
  const std::int64_t L = full.length();
  out.windows_evaluated = L * (L + 1) / 2;
  for (const auto& r : interesting) {
    const bool dominated = std::any_of(interesting.begin(), interesting.end(),
                                       [&](const auto& o) { return o.window.strict_superset_of(r.window); });
    if (!dominated) out.records.push_back(r);
  }
  detail::sort_records(out.records);
  return out;
}

enum class PruneMode {
  Exhaustive,  // record every interesting candidate at a window
  FirstMatch,  // stop at the first interesting candidate (order dependent)
};

// Breadth-first top-down traversal of the window lattice. A window with at
// least one interesting candidate is recorded and its whole sub-lattice is
// pruned; otherwise its two children are queued.
inline DominantSet prune_discover(InterestScorer& score, double threshold, PruneMode mode = PruneMode::Exhaustive) {
  const auto& cands = score.candidates();
  DominantSet out;
  std::vector<TimeWindow> recorded;
  auto pruned = [&](const TimeWindow& w) {
    return std::any_of(recorded.begin(), recorded.end(), [&](const auto& r) { return r.contains(w); });
  };

  std::deque<TimeWindow> queue{score.data().interval};
  std::set<TimeWindow> visited{score.data().interval};
  while (!queue.empty()) {
    const TimeWindow w = queue.front();
    queue.pop_front();
    // A window queued before a later recording may have become pruned since.
    if (pruned(w)) continue;
    ++out.windows_evaluated;
    bool found = false;
    for (size_t c = 0; c < cands.size(); ++c) {
      ++out.score_evaluations;
      const auto res = is_interesting(score(c, w), threshold);
      if (!res.interesting) continue;
      out.records.push_back({c, cands[c].network, w, res.f_value});
      found = true;
      if (mode == PruneMode::FirstMatch) break;
    }
    if (found) {
      recorded.push_back(w);
      continue;
    }
    for (const auto& child : window_children(w)) {
      if (!pruned(child) && visited.insert(child).second) queue.push_back(child);
    }
  }
  detail::sort_records(out.records);
  return out;
}

// --- pipeline ----------------------------------------------------------------

struct IntervalExplanation {
  TemporalDataset data;
  std::vector<BayesianNetwork> networks;  // one per snapshot
  CandidateSet candidates;
};

// Explains every snapshot of the interval independently and deduplicates the results.
inline IntervalExplanation collect_candidates(ModelOracle& oracle, const TemporalGraph& g, const TimeWindow& interval,
                                              int target, const std::vector<int>& variables,
                                              const PerturbationConfig& cfg, const ExplainOptions& opts) {
  IntervalExplanation out;
  out.data = generate_temporal_dataset(oracle, g, interval, target, variables, cfg);
  for (const auto& d : out.data.snapshots) out.networks.push_back(explain_dataset(d, opts));
  out.candidates = CandidateSet::from_networks(out.networks);
  return out;
}

}  // namespace tgx
