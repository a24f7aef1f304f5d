// tgx: explain temporal graph model predictions with per-snapshot Bayesian
// networks and mine the time windows where they dominate.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tgx/discovery.hpp"
#include "tgx/explainer.hpp"
#include "tgx/instances.hpp"
#include "tgx/model.hpp"
#include "tgx/perturbation.hpp"
#include "tgx/protocol.hpp"
#include "tgx/report.hpp"
#include "tgx/synth.hpp"
#include "tgx/temporal_graph.hpp"

namespace fs = std::filesystem;
using namespace tgx;

namespace {

bool verbose() {
  const char* v = std::getenv("TGX_VERBOSE");
  return v && *v && std::string(v) != "0";
}

void log(const std::string& msg) {
  if (verbose()) std::cerr << "[tgx] " << msg << "\n";
}

// Inputs shared by commands that need a graph and a model.
struct InputOptions {
  std::string adjacency, features, labels;
  bool header = false;
  std::string model;
  std::optional<std::uint64_t> synth_seed;
  int hidden = 6;
  int window = 4;
  std::string adapter_cmd;
  double timeout_s = 30.0;
  std::optional<int> report_nodes;  // adapter-serve only

  void add_graph(CLI::App* cmd) {
    cmd->add_option("--adjacency", adjacency, "Adjacency CSV (n rows of n numbers)")->required();
    cmd->add_option("--features", features, "Feature CSV (one row per time step, one column per node)");
    cmd->add_option("--labels", labels, "Optional node label file, one per line");
    cmd->add_flag("--header", header, "Skip one header row in each CSV");
  }

  void add_model(CLI::App* cmd, bool allow_adapter) {
    cmd->add_option("--model", model, "Weights document (format_version 1)");
    cmd->add_option("--synth-seed", synth_seed, "Use random weights from this seed instead of --model");
    cmd->add_option("--hidden", hidden, "Hidden width for --synth-seed");
    cmd->add_option("--window", window, "Model window T for --synth-seed");
    if (allow_adapter) {
      cmd->add_option("--adapter-cmd", adapter_cmd, "Shell command of an external oracle adapter");
      cmd->add_option("--timeout", timeout_s, "Adapter request timeout in seconds");
    }
  }

  TemporalGraph load_graph() const {
    if (features.empty()) throw ParseError("--features is required");
    LoadOptions opts;
    opts.header = header;
    if (!labels.empty()) opts.labels_path = labels;
    return load_dataset(adjacency, features, opts);
  }

  ModelCard load_card(const TemporalGraph& g) const {
    if (!model.empty()) return load_weights(model);
    if (!synth_seed) throw ParseError("one of --model, --synth-seed or --adapter-cmd is required");
    ModelCard card;
    card.name = "tgcn-random";
    card.n_nodes = g.n_nodes();
    card.window = window;
    card.weights = synth_model(g.feature_dim(), hidden, *synth_seed);
    return card;
  }

  std::unique_ptr<ModelOracle> make_oracle(const TemporalGraph& g) const {
    if (!adapter_cmd.empty()) {
      auto client = std::make_unique<protocol::OracleClient>(
          std::make_unique<protocol::ChildProcessTransport>(adapter_cmd),
          std::chrono::milliseconds(static_cast<long long>(timeout_s * 1000)));
      client->record(false);
      const auto info = client->handshake(g);
      log("adapter '" + info.model_name + "' window " + std::to_string(info.window));
      return client;
    }
    return std::make_unique<EmbeddedOracle>(load_card(g), normalize_adjacency(g));
  }
};

struct PerturbOptions {
  PerturbationConfig cfg;
  std::string mode = "mean-replace";

  void add(CLI::App* cmd) {
    cmd->add_option("--samples", cfg.num_samples, "Perturbation samples per snapshot");
    cmd->add_option("--prob", cfg.perturb_prob, "Per-node perturbation probability");
    cmd->add_option("--change-threshold", cfg.change_threshold, "Prediction change counted when |diff| exceeds this");
    cmd->add_option("--mode", mode, "mean-replace or zero-replace");
    cmd->add_option("--seed", cfg.rng_seed, "Seed of the perturbation streams");
  }
  PerturbationConfig config() const {
    PerturbationConfig c = cfg;
    c.mode = parse_perturb_mode(mode);
    c.validate();
    return c;
  }
};

struct DiscoveryOptions {
  double threshold = 1400.0;
  bool raw = false;
  std::string method = "prune";
  bool first_match = false;

  void add(CLI::App* cmd) {
    cmd->add_option("--threshold", threshold, "Interest threshold on the normalized TBIC");
    cmd->add_flag("--raw-threshold", raw, "Threshold the raw TBIC instead of the normalized one");
    cmd->add_option("--discovery", method, "prune or brute")->check(CLI::IsMember({"prune", "brute"}));
    cmd->add_flag("--first-match", first_match, "Prune mode: keep only the first interesting candidate per window");
  }
  DiscoverySettings settings() const {
    DiscoverySettings s;
    s.threshold = threshold;
    s.measure = raw ? InterestMeasure::Raw : InterestMeasure::Normalized;
    s.prune = method == "prune";
    s.mode = first_match ? PruneMode::FirstMatch : PruneMode::Exhaustive;
    return s;
  }
};

nlohmann::ordered_json candidates_json(const CandidateSet& cands) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& c : cands) arr.push_back({{"origin", c.origin}, {"network", network_json(c.network)}});
  return {{"candidates", arr}};
}

CandidateSet candidates_from_file(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(csv::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  std::vector<BayesianNetwork> nets;
  if (j.contains("candidates")) {
    for (const auto& c : j.at("candidates")) {
      auto b = network_from_json(c.at("network"));
      b.snapshot = c.value("origin", -1);
      nets.push_back(std::move(b));
    }
  } else {
    nets.push_back(network_from_json(j));
  }
  return CandidateSet::from_networks(std::move(nets));
}

void write_discovery(OutputTree& out, const CandidateSet& cands, const TemporalDataset& data,
                     const DiscoverySettings& settings, const std::vector<std::string>& labels) {
  const DominantSet result = discover(cands, data, settings);
  out.write("dominant.json", dominant_report(result, cands, settings));
  for (size_t i = 0; i < result.records.size(); ++i) {
    BayesianNetwork b = result.records[i].network;
    b.snapshot = -1;
    std::string dot = to_dot(b, labels);
    const auto& w = result.records[i].window;
    dot.insert(dot.find('\n') + 1, "  label=\"window [" + std::to_string(w.start) + ", " + std::to_string(w.end) + "]\";\n");
    out.write("dominant/record_" + std::to_string(i) + ".dot", dot);
  }
  out.write("bic_gains.csv", gain_series_csv(cands, data));
  std::cout << "dominant records: " << result.records.size() << " (windows evaluated " << result.windows_evaluated
            << ", score evaluations " << result.score_evaluations << ")\n";
  for (const auto& r : result.records) {
    std::cout << "  [" << r.window.start << ", " << r.window.end << "] F=" << r.f_value << "  "
              << canonical_form(r.network) << "\n";
  }
}

// ---------------------------------------------------------------------------

int run_synth(const SynthSpec& spec, const std::string& out_dir) {
  const TemporalGraph g = synth_dataset(spec);
  const ModelCard card = synth_model_card(spec, g);
  OutputTree out(out_dir);
  out.write("adjacency.csv", adjacency_csv(g));
  out.write("features.csv", features_csv(g));
  std::string labels;
  for (const auto& l : g.labels()) labels += l + "\n";
  out.write("labels.txt", labels);
  out.write("model.json", weights_document(card));
  auto truth = synth_manifest(spec);
  truth["suggested_threshold"] = 350.0;
  out.write("synth.json", truth.dump(1) + "\n");

  std::ostringstream cfg;
  cfg << "# tgx run configuration generated by `tgx synth`\n"
      << "[explain]\n"
      << "adjacency = \"" << (fs::path(out_dir) / "adjacency.csv").string() << "\"\n"
      << "features = \"" << (fs::path(out_dir) / "features.csv").string() << "\"\n"
      << "labels = \"" << (fs::path(out_dir) / "labels.txt").string() << "\"\n"
      << "model = \"" << (fs::path(out_dir) / "model.json").string() << "\"\n"
      << "target = " << spec.target << "\n"
      << "start = 0\n"
      << "end = " << spec.steps - 1 << "\n"
      << "seed = " << spec.seed << "\n"
      << "threshold = 350\n";
  out.write("run.cfg", cfg.str());
  out.write_manifest({{"command", "synth"}});
  std::cout << "wrote synthetic instance to " << out_dir << " (planted window [" << spec.planted.start << ", "
            << spec.planted.end << "], influencer " << spec.influencer << ")\n";
  return 0;
}

struct ExplainArgs {
  InputOptions input;
  PerturbOptions perturb;
  DiscoveryOptions discovery;
  int target = 0;
  std::optional<int> start, end;
  std::vector<int> variables;
  std::optional<int> max_variables;
  int max_parents = 3;
  std::string out_dir;
};

int run_explain(const ExplainArgs& a) {
  const TemporalGraph g = a.input.load_graph();
  if (a.target < 0 || a.target >= g.n_nodes()) throw IndexError("target " + std::to_string(a.target) + " out of range");
  auto oracle = a.input.make_oracle(g);
  const int window = oracle->info().window;
  const TimeWindow interval{a.start.value_or(0), a.end.value_or(g.steps() - window)};
  const PerturbationConfig cfg = a.perturb.config();
  std::vector<int> variables = a.variables.empty() ? default_variables(g, a.target) : a.variables;
  if (std::find(variables.begin(), variables.end(), a.target) == variables.end()) variables.push_back(a.target);
  ExplainOptions opts;
  opts.max_variables = a.max_variables.value_or(default_max_variables(g, a.target));
  opts.max_parents = a.max_parents;

  log("explaining snapshots " + std::to_string(interval.start) + ".." + std::to_string(interval.end));
  const IntervalExplanation ex = collect_candidates(*oracle, g, interval, a.target, variables, cfg, opts);

  OutputTree out(a.out_dir);
  for (size_t i = 0; i < ex.networks.size(); ++i) {
    const auto& b = ex.networks[i];
    const auto& d = ex.data.snapshots[i];
    const std::string stem = "snapshot_" + std::to_string(d.t);
    auto j = network_json(b);
    j["snapshot"] = b.snapshot;
    out.write("networks/" + stem + ".json", j.dump() + "\n");
    out.write("networks/" + stem + ".dot", to_dot(b, g.labels()));
    out.write("datasets/" + stem + ".csv", snapshot_csv(d));
    out.write("datasets/" + stem + ".seeds.csv", snapshot_csv(d, true));
    out.write("datasets/" + stem + ".json", snapshot_metadata(d, cfg));
  }
  out.write("candidates.json", candidates_json(ex.candidates).dump(1) + "\n");
  out.write("standard_scores.csv", standard_score_csv(ex.data));
  write_discovery(out, ex.candidates, ex.data, a.discovery.settings(), g.labels());
  out.write_manifest({{"command", "explain"},
                      {"interval", {interval.start, interval.end}},
                      {"target", a.target},
                      {"candidates", ex.candidates.size()}});
  return 0;
}

struct DiscoverArgs {
  std::string datasets;
  std::string candidates;
  std::optional<int> start, end;
  DiscoveryOptions discovery;
  std::string labels;
  std::string out_dir;
};

int run_discover(const DiscoverArgs& a) {
  int lo = std::numeric_limits<int>::max(), hi = std::numeric_limits<int>::min();
  for (const auto& entry : fs::directory_iterator(a.datasets)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("snapshot_", 0) != 0 || entry.path().extension() != ".json") continue;
    const int t = std::stoi(name.substr(9));
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  }
  if (lo > hi) throw IOError("no snapshot datasets in " + a.datasets);
  const TimeWindow interval{a.start.value_or(lo), a.end.value_or(hi)};
  const TemporalDataset data = load_temporal_dataset(a.datasets, interval);
  const CandidateSet cands = candidates_from_file(a.candidates);
  std::vector<std::string> labels;
  if (!a.labels.empty()) {
    for (auto& l : csv::split_lines(csv::read_file(a.labels)))
      if (!csv::trim(l).empty()) labels.emplace_back(csv::trim(l));
  }
  OutputTree out(a.out_dir);
  write_discovery(out, cands, data, a.discovery.settings(), labels);
  out.write_manifest({{"command", "discover"}, {"interval", {interval.start, interval.end}}});
  return 0;
}

int run_export(const std::string& network_path, const std::string& format, const std::string& labels_path,
               const std::string& out_path) {
  const CandidateSet cands = candidates_from_file(network_path);
  std::vector<std::string> labels;
  if (!labels_path.empty()) {
    for (auto& l : csv::split_lines(csv::read_file(labels_path)))
      if (!csv::trim(l).empty()) labels.emplace_back(csv::trim(l));
  }
  std::string text;
  if (format == "dot") {
    for (const auto& c : cands) text += to_dot(c.network, labels);
  } else {
    for (const auto& c : cands) text += canonical_form(c.network) + "\n";
  }
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
  } else {
    csv::write_atomic(out_path, text);
  }
  return 0;
}

struct BenchArgs {
  std::vector<int> sizes{1, 2, 4, 8, 16, 24, 32};
  int candidates = 5;
  int variables = 4;
  int samples = 200;
  std::string scenario = "all";
  std::uint64_t seed = 0;
  std::string out;
};

int run_bench(const BenchArgs& a) {
  std::ostringstream csv_out;
  csv_out << "scenario,snapshots,candidates,method,wall_ms,windows_evaluated,score_evaluations,records\n";
  std::vector<std::string> scenarios =
      a.scenario == "all" ? std::vector<std::string>{"best", "worst", "random"} : std::vector<std::string>{a.scenario};
  for (const auto& scenario : scenarios) {
    for (int L : a.sizes) {
      InstanceSpec spec{L, a.variables, a.samples, a.candidates, a.seed + static_cast<std::uint64_t>(L)};
      const TemporalDataset data = random_temporal_dataset(spec);
      const CandidateSet cands = random_candidates(spec);
      double threshold = 0.0;
      if (scenario == "best") {
        threshold = std::numeric_limits<double>::lowest();
      } else if (scenario == "worst") {
        threshold = std::numeric_limits<double>::max();
      } else {
        // Just above every candidate's full-interval score, so only shorter
        // windows can be interesting.
        InterestScorer probe(cands, data);
        threshold = std::numeric_limits<double>::lowest();
        for (size_t c = 0; c < cands.size(); ++c) threshold = std::max(threshold, probe(c, data.interval));
      }
      for (const bool prune : {false, true}) {
        InterestScorer score(cands, data);
        // Per-snapshot gains are shared setup, not part of either traversal.
        for (size_t c = 0; c < cands.size(); ++c)
          for (int t = 0; t < L; ++t) score.snapshot_value(c, t);
        const auto t0 = std::chrono::steady_clock::now();
        const DominantSet r = prune ? prune_discover(score, threshold) : brute_force_discover(score, threshold);
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        csv_out << scenario << "," << L << "," << cands.size() << "," << (prune ? "prune" : "brute-force") << ","
                << ms << "," << r.windows_evaluated << "," << r.score_evaluations << "," << r.records.size() << "\n";
      }
    }
  }
  if (a.out.empty() || a.out == "-") {
    std::cout << csv_out.str();
  } else {
    csv::write_atomic(a.out, csv_out.str());
  }
  return 0;
}

struct AdapterCheckArgs {
  InputOptions input;
  double tolerance = 1e-5;
  int samples = 200;
  std::vector<int> snapshots;
  int target = 0;
  std::string transcript;
};

int run_adapter_check(const AdapterCheckArgs& a) {
  if (a.input.adapter_cmd.empty()) throw ParseError("--adapter-cmd is required");
  const TemporalGraph g = a.input.load_graph();
  EmbeddedOracle reference(a.input.load_card(g), normalize_adjacency(g));
  protocol::OracleClient client(std::make_unique<protocol::ChildProcessTransport>(a.input.adapter_cmd),
                                std::chrono::milliseconds(static_cast<long long>(a.input.timeout_s * 1000)));
  bool pass = true;
  auto report = [&](const std::string& what, bool ok, const std::string& detail = "") {
    std::cout << (ok ? "PASS " : "FAIL ") << what << (detail.empty() ? "" : " (" + detail + ")") << "\n";
    pass = pass && ok;
  };

  OracleInfo info;
  try {
    info = client.handshake(g);
  } catch (const MismatchError& e) {
    report("handshake metadata", false, e.what());
    return 1;
  }
  const OracleInfo ref = reference.info();
  report("handshake metadata", info.n_nodes == ref.n_nodes && info.feature_dim == ref.feature_dim &&
                                   info.window == ref.window,
         info.model_name);

  std::vector<int> corpus = a.snapshots;
  const int last = g.steps() - info.window;
  if (corpus.empty()) corpus = {0, last / 2, last};
  PerturbationConfig cfg;
  cfg.num_samples = a.samples;
  const TimeWindow interval{0, last};
  double worst = 0.0;
  bool datasets_equal = true;
  for (int t : corpus) {
    std::span<const Matrix> x_seq(g.features().data() + t, static_cast<size_t>(info.window));
    const HiddenState h_remote = client.hidden_state(x_seq);
    const HiddenState h_ref = reference.hidden_state(x_seq);
    if (h_remote.h.rows() != h_ref.h.rows() || h_remote.h.cols() != h_ref.h.cols()) {
      report("hidden state shape at t=" + std::to_string(t), false);
      continue;
    }
    const Prediction y_remote = client.predict_with_hidden(x_seq.back(), h_remote);
    const Prediction y_ref = reference.predict_with_hidden(x_seq.back(), h_ref);
    worst = std::max(worst, (y_remote.y - y_ref.y).cwiseAbs().maxCoeff());
    const auto vars = default_variables(g, a.target);
    const auto d_remote = generate_snapshot_dataset(client, g, t, a.target, vars, cfg, interval);
    const auto d_ref = generate_snapshot_dataset(reference, g, t, a.target, vars, cfg, interval);
    datasets_equal = datasets_equal && d_remote == d_ref;
  }
  std::ostringstream diff;
  diff << "max |diff| " << worst;
  report("predictions within tolerance", worst <= a.tolerance, diff.str());
  report("snapshot datasets identical", datasets_equal);
  client.shutdown();

  const auto rep = protocol::check_transcript(client.transcript(), &reference, a.tolerance);
  report("transcript conforms", rep.ok(), rep.ok() ? "" : rep.problems.front());
  if (!a.transcript.empty()) csv::write_atomic(a.transcript, protocol::transcript_text(client.transcript()));
  return pass ? 0 : 1;
}

// Wraps an oracle and misreports the node count (for exercising handshake checks).
class MisreportingOracle final : public ModelOracle {
public:
  MisreportingOracle(ModelOracle& inner, int nodes) : inner_(inner), nodes_(nodes) {}
  OracleInfo info() override {
    auto i = inner_.info();
    i.n_nodes = nodes_;
    return i;
  }
  HiddenState hidden_state(std::span<const Matrix> x) override { return inner_.hidden_state(x); }
  Prediction predict_with_hidden(const Matrix& x, const HiddenState& h) override {
    return inner_.predict_with_hidden(x, h);
  }

private:
  ModelOracle& inner_;
  int nodes_;
};

int run_adapter_serve(const InputOptions& input) {
  LoadOptions opts;
  opts.header = input.header;
  auto adj = csv::read_numeric(input.adjacency, input.header);
  Matrix a(static_cast<Eigen::Index>(adj.size()), static_cast<Eigen::Index>(adj.size()));
  for (size_t i = 0; i < adj.size(); ++i) {
    if (adj[i].size() != adj.size()) throw DimensionError("adjacency is not square");
    for (size_t j = 0; j < adj.size(); ++j) a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = adj[i][j];
  }
  ModelCard card;
  if (!input.model.empty()) {
    card = load_weights(input.model);
  } else if (input.synth_seed) {
    card.name = "tgcn-random";
    card.n_nodes = static_cast<int>(adj.size());
    card.window = input.window;
    card.weights = synth_model(1, input.hidden, *input.synth_seed);
  } else {
    throw ParseError("--model or --synth-seed is required");
  }
  EmbeddedOracle oracle(card, normalize_adjacency(a));
  std::optional<MisreportingOracle> liar;
  if (input.report_nodes) liar.emplace(oracle, *input.report_nodes);
  protocol::AdapterServer server(liar ? static_cast<ModelOracle&>(*liar) : static_cast<ModelOracle&>(oracle));
  protocol::serve(server, std::cin, std::cout);
  return 0;
}

// Lets `--config FILE` appear after the subcommand name as well.
std::vector<std::string> hoist_config(int argc, char** argv) {
  std::vector<std::string> front, rest;
  for (int i = 1; i < argc; ++i) {
    std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) {
      front.push_back(arg);
      front.push_back(argv[++i]);
    } else if (arg.rfind("--config=", 0) == 0) {
      front.push_back(arg);
    } else {
      rest.push_back(arg);
    }
  }
  front.insert(front.end(), rest.begin(), rest.end());
  std::reverse(front.begin(), front.end());  // CLI11 consumes a reversed vector
  return front;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal graph model explainer: per-snapshot Bayesian network explanations and dominant windows"};
  app.set_config("--config", "", "Key-value configuration file; [section] names match subcommands");
  app.require_subcommand(1);

  SynthSpec synth;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic dataset, weights and planted ground truth");
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--nodes", synth.n_nodes, "Number of nodes");
  synth_cmd->add_option("--steps", synth.steps, "Number of explained snapshots");
  synth_cmd->add_option("--window", synth.window, "Model input window T");
  synth_cmd->add_option("--hidden", synth.hidden_dim, "Hidden width of the model");
  synth_cmd->add_option("--seed", synth.seed, "Generator seed");
  synth_cmd->add_option("--target", synth.target, "Target node index");
  synth_cmd->add_option("--influencer", synth.influencer, "Node that drives the target inside the planted window");
  synth_cmd->add_option("--planted-start", synth.planted.start, "First snapshot of the planted window");
  synth_cmd->add_option("--planted-end", synth.planted.end, "Last snapshot of the planted window");
  synth_cmd->add_option("--amplitude", synth.amplitude, "Deviation of the influencer inside the planted window");
  synth_cmd->add_option("--extra-edges", synth.extra_edges, "Random edges added to the base ring");

  ExplainArgs explain;
  auto* explain_cmd = app.add_subcommand("explain", "Explain every snapshot of an interval and discover dominant windows");
  explain.input.add_graph(explain_cmd);
  explain.input.add_model(explain_cmd, true);
  explain.perturb.add(explain_cmd);
  explain.discovery.add(explain_cmd);
  explain_cmd->add_option("--target", explain.target, "Target node index");
  explain_cmd->add_option("--start", explain.start, "First explained snapshot");
  explain_cmd->add_option("--end", explain.end, "Last explained snapshot");
  explain_cmd->add_option("--variables", explain.variables, "Candidate variable nodes (default: 2-hop neighborhood)")
      ->delimiter(',');
  explain_cmd->add_option("--max-variables", explain.max_variables, "Variable budget M");
  explain_cmd->add_option("--max-parents", explain.max_parents, "Parent limit per node in structure search");
  explain_cmd->add_option("--out", explain.out_dir, "Output directory")->required();

  DiscoverArgs disc;
  auto* discover_cmd = app.add_subcommand("discover", "Run dominant-window discovery on saved datasets");
  discover_cmd->add_option("--datasets", disc.datasets, "Directory of snapshot_<t> datasets")->required();
  discover_cmd->add_option("--candidates", disc.candidates, "candidates.json or a single network document")->required();
  discover_cmd->add_option("--start", disc.start, "First snapshot of the saved datasets");
  discover_cmd->add_option("--end", disc.end, "Last snapshot of the saved datasets");
  discover_cmd->add_option("--labels", disc.labels, "Optional node label file, one per line");
  disc.discovery.add(discover_cmd);
  discover_cmd->add_option("--out", disc.out_dir, "Output directory")->required();

  std::string export_in, export_format = "dot", export_labels, export_out;
  auto* export_cmd = app.add_subcommand("export", "Re-serialize networks as DOT or canonical JSON");
  export_cmd->add_option("--network", export_in, "Network document or candidates.json")->required();
  export_cmd->add_option("--format", export_format, "Output format")->check(CLI::IsMember({"dot", "json"}));
  export_cmd->add_option("--labels", export_labels, "Optional node label file, one per line");
  export_cmd->add_option("--out", export_out, "Output file (default stdout)");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Compare brute-force and pruning discovery costs");
  bench_cmd->add_option("--sizes", bench.sizes, "Snapshot counts")->delimiter(',');
  bench_cmd->add_option("--candidates", bench.candidates, "Candidate networks per instance");
  bench_cmd->add_option("--variables", bench.variables, "Variables per snapshot");
  bench_cmd->add_option("--samples", bench.samples, "Samples per snapshot");
  bench_cmd->add_option("--scenario", bench.scenario, "Threshold scenario")->check(CLI::IsMember({"all", "best", "worst", "random"}));
  bench_cmd->add_option("--seed", bench.seed, "Instance seed");
  bench_cmd->add_option("--out", bench.out, "CSV output file (default stdout)");

  AdapterCheckArgs check;
  auto* check_cmd = app.add_subcommand("adapter-check", "Check an external oracle adapter against the embedded model");
  check.input.add_graph(check_cmd);
  check.input.add_model(check_cmd, true);
  check_cmd->add_option("--tolerance", check.tolerance, "Largest allowed |prediction difference|");
  check_cmd->add_option("--samples", check.samples, "Perturbation samples per corpus snapshot");
  check_cmd->add_option("--snapshots", check.snapshots, "Comma-separated snapshots used for the dataset comparison")->delimiter(',');
  check_cmd->add_option("--target", check.target, "Target node index");
  check_cmd->add_option("--transcript", check.transcript, "Write the recorded exchange here");

  InputOptions serve;
  auto* serve_cmd = app.add_subcommand("adapter-serve", "Serve the embedded model over the oracle protocol on stdio");
  serve_cmd->add_option("--adjacency", serve.adjacency, "Adjacency CSV (n rows of n numbers)")->required();
  serve_cmd->add_flag("--header", serve.header);
  serve.add_model(serve_cmd, false);
  serve_cmd->add_option("--report-nodes", serve.report_nodes, "Misreport n_nodes in the handshake (testing)");

  try {
    app.parse(hoist_config(argc, argv));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*synth_cmd) return run_synth(synth, synth_out);
    if (*explain_cmd) return run_explain(explain);
    if (*discover_cmd) return run_discover(disc);
    if (*export_cmd) return run_export(export_in, export_format, export_labels, export_out);
    if (*bench_cmd) return run_bench(bench);
    if (*check_cmd) return run_adapter_check(check);
    if (*serve_cmd) return run_adapter_serve(serve);
  } catch (const tgx::Error& e) {
    std::cerr << "tgx: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "tgx: internal error: " << e.what() << "\n";
    return 5;
  }
  return 5;
}
