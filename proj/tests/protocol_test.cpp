#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "tgx/perturbation.hpp"
#include "tgx/protocol.hpp"
#include "tgx/synth.hpp"

namespace fs = std::filesystem;
using namespace tgx;
using namespace tgx::protocol;
using namespace std::chrono_literals;

namespace {

struct Setup {
  SynthSpec spec;
  TemporalGraph graph;
  ModelCard card;
  fs::path dir;

  Setup() : graph(synth_dataset(spec)), card(synth_model_card(spec, graph)) {
    dir = fs::path(TGX_TEST_TMP) / "protocol";
    fs::create_directories(dir);
    save_dataset(graph, dir / "adjacency.csv", dir / "features.csv");
    save_weights(card, dir / "model.json");
  }

  EmbeddedOracle oracle() const { return EmbeddedOracle(card, normalize_adjacency(graph)); }

  std::string serve_cmd(const std::string& extra = "") const {
    return std::string(TGX_CLI_PATH) + " adapter-serve --adjacency " + (dir / "adjacency.csv").string() +
           " --model " + (dir / "model.json").string() + extra;
  }
};

Setup& setup() {
  static Setup s;
  return s;
}

std::span<const Matrix> window_at(const TemporalGraph& g, int t, int window) {
  return {g.features().data() + t, static_cast<size_t>(window)};
}

}  // namespace

TEST(Arrays, EncodeDecodeRoundTrip) {
  Matrix m(2, 3);
  m << 1.5, -2, 1e-17, 0.1, 1.0 / 3.0, 7;
  EXPECT_EQ(decode_matrix(json::parse(encode_matrix(m).dump()), "m"), m);
  Vector v(3);
  v << 0.25, -1e300, 3;
  EXPECT_EQ(decode_vector(json::parse(encode_vector(v).dump()), "v"), v);
  std::vector<Matrix> seq{m, 2 * m};
  const auto back = decode_sequence(json::parse(encode_sequence(seq).dump()), "s");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1], 2 * m);
}

TEST(Arrays, MalformedPayloadsRejected) {
  EXPECT_THROW(decode_matrix(json::parse(R"({"shape":[2,2],"data":[[1,2]]})"), "m"), ProtocolError);
  EXPECT_THROW(decode_matrix(json::parse(R"({"shape":[1,2],"data":[[1,"x"]]})"), "m"), ProtocolError);
  EXPECT_THROW(decode_matrix(json::parse(R"({"shape":[2],"data":[1,2]})"), "m"), ProtocolError);
  EXPECT_THROW(decode_vector(json::parse(R"({"data":[1,2]})"), "v"), ProtocolError);
  EXPECT_THROW(decode_vector(json::parse(R"({"shape":[-1],"data":[]})"), "v"), ProtocolError);
}

TEST(AdapterServer, ErrorResponses) {
  auto oracle = setup().oracle();
  AdapterServer server(oracle);
  auto resp = json::parse(server.handle("not json"));
  EXPECT_FALSE(resp["ok"].get<bool>());
  EXPECT_EQ(resp["error"]["code"], "bad_request");
  resp = json::parse(server.handle(R"({"id":3,"op":"fly"})"));
  EXPECT_EQ(resp["id"], 3);
  EXPECT_EQ(resp["error"]["code"], "bad_request");
  resp = json::parse(server.handle(R"({"op":"handshake"})"));
  EXPECT_EQ(resp["error"]["code"], "bad_request");
  json bad = {{"id", 4}, {"op", "predict"}, {"x_last", encode_matrix(Matrix::Zero(3, 1))},
              {"hidden", encode_matrix(Matrix::Zero(8, setup().spec.hidden_dim))}};
  resp = json::parse(server.handle(bad.dump()));
  EXPECT_EQ(resp["error"]["code"], "shape_mismatch");
  EXPECT_FALSE(server.shutdown_requested());
  resp = json::parse(server.handle(R"({"id":5,"op":"shutdown"})"));
  EXPECT_TRUE(resp["ok"].get<bool>());
  EXPECT_TRUE(server.shutdown_requested());
}

TEST(AdapterServer, ServeLoopStopsAtShutdown) {
  auto oracle = setup().oracle();
  AdapterServer server(oracle);
  std::istringstream in("{\"id\":0,\"op\":\"handshake\"}\n\n{\"id\":1,\"op\":\"shutdown\"}\n{\"id\":2,\"op\":\"handshake\"}\n");
  std::ostringstream out;
  serve(server, in, out);
  const auto lines = csv::split_lines(out.str());
  ASSERT_GE(lines.size(), 2u);
  EXPECT_EQ(json::parse(lines[0])["n_nodes"], 8);
  EXPECT_EQ(json::parse(lines[1])["id"], 1);
  EXPECT_TRUE(lines.size() == 2 || lines[2].empty());
}

TEST(OracleClient, LoopbackMatchesEmbedded) {
  auto& s = setup();
  auto reference = s.oracle();
  auto served = s.oracle();
  OracleClient client(std::make_unique<LoopbackTransport>(served));
  const auto info = client.handshake(s.graph);
  EXPECT_EQ(info, reference.info());
  for (int t : {0, 12, 36}) {
    const auto x = window_at(s.graph, t, info.window);
    const auto h = client.hidden_state(x);
    EXPECT_EQ(h.h, reference.hidden_state(x).h);
    EXPECT_EQ(client.predict_with_hidden(x.back(), h).y, reference.predict_with_hidden(x.back(), h).y);
  }
  client.shutdown();
  const auto& t = client.transcript();
  ASSERT_EQ(t.size(), 8u);
  EXPECT_EQ(json::parse(t.front().request)["op"], "handshake");
  EXPECT_EQ(json::parse(t.back().request)["op"], "shutdown");
  const auto rep = check_transcript(t, &reference);
  EXPECT_TRUE(rep.ok()) << (rep.problems.empty() ? "" : rep.problems.front());
  EXPECT_EQ(rep.max_abs_diff, 0.0);
}

TEST(OracleClient, ChildProcessAdapterGivesIdenticalDatasets) {
  auto& s = setup();
  auto reference = s.oracle();
  OracleClient client(std::make_unique<ChildProcessTransport>(s.serve_cmd()), 10s);
  client.record(false);
  client.handshake(s.graph);
  PerturbationConfig cfg;
  cfg.num_samples = 200;
  const auto vars = default_variables(s.graph, 0);
  for (int t : {5, 15}) {
    const auto remote = generate_snapshot_dataset(client, s.graph, t, 0, vars, cfg, {0, 39});
    const auto local = generate_snapshot_dataset(reference, s.graph, t, 0, vars, cfg, {0, 39});
    EXPECT_TRUE(remote == local) << "snapshot " << t;
  }
  EXPECT_TRUE(client.transcript().empty());
}

TEST(OracleClient, HandshakeMismatchRejected) {
  auto& s = setup();
  OracleClient client(std::make_unique<ChildProcessTransport>(s.serve_cmd(" --report-nodes 5")), 10s);
  EXPECT_THROW(client.handshake(s.graph), MismatchError);
}

TEST(OracleClient, WrongResponseIdRejected) {
  OracleClient client(
      std::make_unique<ChildProcessTransport>(R"(read line; echo '{"id":7,"ok":true,"n_nodes":8,"feature_dim":1,"window":4}')"),
      5s);
  EXPECT_THROW(client.handshake(), ProtocolError);
}

TEST(OracleClient, GarbageResponseRejected) {
  OracleClient client(std::make_unique<ChildProcessTransport>("read line; echo 'hello there'"), 5s);
  EXPECT_THROW(client.handshake(), ProtocolError);
}

TEST(OracleClient, ErrorResponseSurfaces) {
  OracleClient client(
      std::make_unique<ChildProcessTransport>(R"(read line; echo '{"id":0,"ok":false,"error":{"code":"internal","message":"boom"}}')"),
      5s);
  try {
    client.handshake();
    FAIL() << "expected ProtocolError";
  } catch (const ProtocolError& e) {
    EXPECT_NE(std::string(e.what()).find("boom"), std::string::npos);
  }
}

TEST(OracleClient, SilentAdapterTimesOut) {
  OracleClient client(std::make_unique<ChildProcessTransport>("read line; exec sleep 3"), 200ms);
  const auto t0 = std::chrono::steady_clock::now();
  EXPECT_THROW(client.handshake(), TimeoutError);
  EXPECT_LT(std::chrono::steady_clock::now() - t0, 2s);
}

TEST(OracleClient, ExitedAdapterReported) {
  OracleClient client(std::make_unique<ChildProcessTransport>("exit 0"), 5s);
  EXPECT_THROW(client.handshake(), ProtocolError);
}

TEST(Transcript, TextRoundTrip) {
  auto& s = setup();
  auto served = s.oracle();
  OracleClient client(std::make_unique<LoopbackTransport>(served));
  client.handshake();
  client.hidden_state(window_at(s.graph, 0, 4));
  const std::string text = transcript_text(client.transcript());
  EXPECT_EQ(text.substr(0, 2), "> ");
  const auto back = parse_transcript(text);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].response, client.transcript()[1].response);
  EXPECT_THROW(parse_transcript("< {}\n"), ParseError);
  EXPECT_THROW(parse_transcript("> {}\n"), ParseError);
}

TEST(Transcript, ConformanceFindsViolations) {
  auto& s = setup();
  auto reference = s.oracle();
  auto served = s.oracle();
  OracleClient client(std::make_unique<LoopbackTransport>(served));
  client.handshake();
  const auto x = window_at(s.graph, 3, 4);
  const auto h = client.hidden_state(x);
  client.predict_with_hidden(x.back(), h);
  Transcript t = client.transcript();
  ASSERT_TRUE(check_transcript(t, &reference).ok());

  // Prediction nudged beyond tolerance.
  Transcript nudged = t;
  auto resp = json::parse(nudged[2].response);
  resp["prediction"]["data"][0] = resp["prediction"]["data"][0].get<double>() + 1e-3;
  nudged[2].response = resp.dump();
  auto rep = check_transcript(nudged, &reference, 1e-5);
  EXPECT_FALSE(rep.ok());
  EXPECT_NEAR(rep.max_abs_diff, 1e-3, 1e-9);
  EXPECT_TRUE(check_transcript(nudged, nullptr).ok());

  // Missing handshake and out-of-order ids.
  EXPECT_FALSE(check_transcript(Transcript(t.begin() + 1, t.end())).ok());
  Transcript swapped = t;
  std::swap(swapped[1], swapped[2]);
  EXPECT_FALSE(check_transcript(swapped).ok());

  // Response that does not echo the id.
  Transcript wrong_id = t;
  resp = json::parse(wrong_id[1].response);
  resp["id"] = 9;
  wrong_id[1].response = resp.dump();
  EXPECT_FALSE(check_transcript(wrong_id).ok());

  // Shape inconsistent with the handshake.
  Transcript reshaped = t;
  resp = json::parse(reshaped[0].response);
  resp["n_nodes"] = 7;
  reshaped[0].response = resp.dump();
  EXPECT_FALSE(check_transcript(reshaped).ok());
}
