#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "tgx/csv.hpp"
#include "tgx/discovery.hpp"

namespace tgx {

struct DiscoverySettings {
  double threshold = 1400.0;
  InterestMeasure measure = InterestMeasure::Normalized;
  bool prune = true;
  PruneMode mode = PruneMode::Exhaustive;

  std::string method() const {
    if (!prune) return "brute-force";
    return mode == PruneMode::Exhaustive ? "prune" : "prune-first-match";
  }
};

inline DominantSet discover(const CandidateSet& cands, const TemporalDataset& data, const DiscoverySettings& s) {
  if (cands.empty()) throw ValueError("no candidate networks to evaluate");
  InterestScorer score(cands, data, s.measure);
  return s.prune ? prune_discover(score, s.threshold, s.mode) : brute_force_discover(score, s.threshold);
}

// Records and instrumentation as a JSON document. Everything outside the
// "instrumentation" block depends only on the discovered set.
inline std::string dominant_report(const DominantSet& result, const CandidateSet& cands, const DiscoverySettings& s) {
  nlohmann::ordered_json j;
  j["threshold"] = s.threshold;
  j["measure"] = s.measure == InterestMeasure::Normalized ? "normalized-tbic" : "tbic";
  nlohmann::ordered_json records = nlohmann::ordered_json::array();
  for (const auto& r : result.records) {
    nlohmann::ordered_json rec;
    rec["window"] = {r.window.start, r.window.end};
    rec["candidate"] = r.candidate;
    rec["origin"] = cands[r.candidate].origin;
    rec["f_value"] = r.f_value;
    rec["network"] = network_json(r.network);
    records.push_back(std::move(rec));
  }
  j["records"] = std::move(records);
  j["instrumentation"] = {{"method", s.method()},
                          {"candidates", cands.size()},
                          {"windows_evaluated", result.windows_evaluated},
                          {"score_evaluations", result.score_evaluations}};
  return j.dump(1) + "\n";
}

// One row per snapshot, one column per candidate: BIC gain of the candidate's
// edges over its edgeless counterpart on that snapshot's data.
inline std::string gain_series_csv(const CandidateSet& cands, const TemporalDataset& data) {
  std::string out = "t";
  for (size_t c = 0; c < cands.size(); ++c) out += ",candidate_" + std::to_string(c);
  out += '\n';
  for (int t = data.interval.start; t <= data.interval.end; ++t) {
    out += std::to_string(t);
    for (const auto& cand : cands) out += "," + csv::format_double(snapshot_gain(cand.network, data.at(t)));
    out += '\n';
  }
  return out;
}

// BIC of the edgeless network over all candidate variables, per snapshot.
inline std::string standard_score_csv(const TemporalDataset& data) {
  const BayesianNetwork standard(data.variables, data.target);
  std::string out = "t,standard_bic\n";
  for (int t = data.interval.start; t <= data.interval.end; ++t) {
    out += std::to_string(t) + "," + csv::format_double(bic_score(standard, data.at(t))) + "\n";
  }
  return out;
}

// 64-bit FNV-1a, hex encoded; identifies file contents in run manifests.
inline std::string content_hash(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Collects files for one output directory and writes them with a manifest
// listing each path and content hash.
class OutputTree {
public:
  explicit OutputTree(std::filesystem::path root) : root_(std::move(root)) {}

  void write(const std::string& relative, const std::string& content) {
    csv::write_atomic(root_ / relative, content);
    files_[relative] = content_hash(content);
  }

  void write_manifest(const nlohmann::ordered_json& extra = {}) {
    nlohmann::ordered_json j = extra.is_null() ? nlohmann::ordered_json::object() : extra;
    nlohmann::ordered_json files = nlohmann::ordered_json::array();
    for (const auto& [path, hash] : files_) files.push_back({{"path", path}, {"fnv1a64", hash}});
    j["files"] = std::move(files);
    csv::write_atomic(root_ / "manifest.json", j.dump(1) + "\n");
  }

  const std::filesystem::path& root() const { return root_; }

private:
  std::filesystem::path root_;
  std::map<std::string, std::string> files_;
};

}  // namespace tgx
