#pragma once

// Line-delimited JSON protocol that lets an external process act as the
// model oracle. See docs/protocol.md for the grammar.

#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <deque>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tgx/error.hpp"
#include "tgx/model.hpp"

namespace tgx::protocol {

using json = nlohmann::json;
using namespace std::chrono_literals;

inline constexpr int kProtocolVersion = 1;

// --- array payloads ------------------------------------------------------------

inline json encode_matrix(const Matrix& m) {
  json data = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    data.push_back(std::move(row));
  }
  return {{"shape", {m.rows(), m.cols()}}, {"data", std::move(data)}};
}

inline json encode_vector(const Vector& v) {
  json data = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) data.push_back(v(i));
  return {{"shape", {v.size()}}, {"data", std::move(data)}};
}

inline json encode_sequence(std::span<const Matrix> seq) {
  json data = json::array();
  for (const auto& m : seq) data.push_back(encode_matrix(m).at("data"));
  const Eigen::Index rows = seq.empty() ? 0 : seq.front().rows(), cols = seq.empty() ? 0 : seq.front().cols();
  return {{"shape", {seq.size(), rows, cols}}, {"data", std::move(data)}};
}

inline std::vector<std::int64_t> shape_of(const json& arr, size_t rank, const char* what) {
  if (!arr.is_object() || !arr.contains("shape") || !arr.contains("data")) {
    throw ProtocolError(std::string(what) + ": array needs shape and data");
  }
  auto shape = arr.at("shape").get<std::vector<std::int64_t>>();
  if (shape.size() != rank) throw ProtocolError(std::string(what) + ": wrong array rank");
  for (auto s : shape)
    if (s < 0) throw ProtocolError(std::string(what) + ": negative extent");
  return shape;
}

inline double number_at(const json& v, const char* what) {
  if (!v.is_number()) throw ProtocolError(std::string(what) + ": non-numeric entry");
  return v.get<double>();
}

inline Matrix decode_matrix(const json& arr, const char* what) {
  auto shape = shape_of(arr, 2, what);
  const auto& data = arr.at("data");
  if (!data.is_array() || static_cast<std::int64_t>(data.size()) != shape[0]) {
    throw ProtocolError(std::string(what) + ": data does not match shape");
  }
  Matrix m(shape[0], shape[1]);
  for (std::int64_t i = 0; i < shape[0]; ++i) {
    const auto& row = data[static_cast<size_t>(i)];
    if (!row.is_array() || static_cast<std::int64_t>(row.size()) != shape[1]) {
      throw ProtocolError(std::string(what) + ": data does not match shape");
    }
    for (std::int64_t j = 0; j < shape[1]; ++j) m(i, j) = number_at(row[static_cast<size_t>(j)], what);
  }
  return m;
}

inline Vector decode_vector(const json& arr, const char* what) {
  auto shape = shape_of(arr, 1, what);
  const auto& data = arr.at("data");
  if (!data.is_array() || static_cast<std::int64_t>(data.size()) != shape[0]) {
    throw ProtocolError(std::string(what) + ": data does not match shape");
  }
  Vector v(shape[0]);
  for (std::int64_t i = 0; i < shape[0]; ++i) v(i) = number_at(data[static_cast<size_t>(i)], what);
  return v;
}

inline std::vector<Matrix> decode_sequence(const json& arr, const char* what) {
  auto shape = shape_of(arr, 3, what);
  const auto& data = arr.at("data");
  if (!data.is_array() || static_cast<std::int64_t>(data.size()) != shape[0]) {
    throw ProtocolError(std::string(what) + ": data does not match shape");
  }
  std::vector<Matrix> seq;
  for (const auto& frame : data) seq.push_back(decode_matrix({{"shape", {shape[1], shape[2]}}, {"data", frame}}, what));
  return seq;
}

// --- server side -----------------------------------------------------------------

// Answers protocol requests with an in-process oracle. Used by the loopback
// adapter (`tgx adapter-serve`) and as the reference when checking transcripts.
class AdapterServer {
public:
  explicit AdapterServer(ModelOracle& oracle) : oracle_(oracle) {}

  bool shutdown_requested() const { return shutdown_; }

  std::string handle(const std::string& line) {
    json id = nullptr;
    try {
      json req = json::parse(line);
      if (!req.is_object()) throw ProtocolError("request must be a JSON object");
      if (req.contains("id")) id = req.at("id");
      if (!id.is_number_integer()) throw ProtocolError("request id must be an integer");
      return respond(req, id).dump();
    } catch (const json::exception& e) {
      return error(id, "bad_request", e.what()).dump();
    } catch (const ProtocolError& e) {
      return error(id, "bad_request", e.what()).dump();
    } catch (const DimensionError& e) {
      return error(id, "shape_mismatch", e.what()).dump();
    } catch (const std::exception& e) {
      return error(id, "internal", e.what()).dump();
    }
  }

private:
  static json error(const json& id, const std::string& code, const std::string& message) {
    return {{"id", id}, {"ok", false}, {"error", {{"code", code}, {"message", message}}}};
  }

  json respond(const json& req, const json& id) {
    const std::string op = req.at("op").get<std::string>();
    if (op == "handshake") {
      const OracleInfo info = oracle_.info();
      return {{"id", id},           {"ok", true},
              {"protocol", kProtocolVersion}, {"n_nodes", info.n_nodes},
              {"feature_dim", info.feature_dim}, {"window", info.window},
              {"model_name", info.model_name}};
    }
    if (op == "hidden_state") {
      const auto seq = decode_sequence(req.at("x_seq"), "x_seq");
      const HiddenState h = oracle_.hidden_state(seq);
      return {{"id", id}, {"ok", true}, {"hidden", encode_matrix(h.h)}};
    }
    if (op == "predict") {
      const Matrix x = decode_matrix(req.at("x_last"), "x_last");
      const HiddenState h{decode_matrix(req.at("hidden"), "hidden")};
      return {{"id", id}, {"ok", true}, {"prediction", encode_vector(oracle_.predict_with_hidden(x, h).y)}};
    }
    if (op == "shutdown") {
      shutdown_ = true;
      return {{"id", id}, {"ok", true}};
    }
    throw ProtocolError("unknown op '" + op + "'");
  }

  ModelOracle& oracle_;
  bool shutdown_ = false;
};

// Request loop over a pair of streams; one response line per request line,
// flushed immediately. Returns when shutdown is requested or input ends.
inline void serve(AdapterServer& server, std::istream& in, std::ostream& out) {
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out << server.handle(line) << '\n' << std::flush;
    if (server.shutdown_requested()) break;
  }
}

// --- transports ------------------------------------------------------------------

class LineTransport {
public:
  virtual ~LineTransport() = default;
  virtual void send(const std::string& line) = 0;
  virtual std::string receive(std::chrono::milliseconds timeout) = 0;
};

// In-process transport straight into an AdapterServer.
class LoopbackTransport final : public LineTransport {
public:
  explicit LoopbackTransport(ModelOracle& oracle) : server_(oracle) {}
  void send(const std::string& line) override { pending_.push_back(server_.handle(line)); }
  std::string receive(std::chrono::milliseconds) override {
    if (pending_.empty()) throw TimeoutError("no response pending");
    auto line = std::move(pending_.front());
    pending_.pop_front();
    return line;
  }

private:
  AdapterServer server_;
  std::deque<std::string> pending_;
};

// Runs `/bin/sh -c command` with stdin/stdout connected to pipes.
class ChildProcessTransport final : public LineTransport {
public:
  explicit ChildProcessTransport(const std::string& command) {
    // A dead adapter must surface as EPIPE, not terminate this process.
    ::signal(SIGPIPE, SIG_IGN);
    int to_child[2], from_child[2];
    if (::pipe(to_child) != 0) throw IOError("pipe failed");
    if (::pipe(from_child) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      throw IOError("pipe failed");
    }
    pid_ = ::fork();
    if (pid_ < 0) throw IOError("fork failed");
    if (pid_ == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::close(to_child[0]);
      ::close(to_child[1]);
      ::close(from_child[0]);
      ::close(from_child[1]);
      ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    write_fd_ = to_child[1];
    read_fd_ = from_child[0];
  }

  ChildProcessTransport(const ChildProcessTransport&) = delete;
  ChildProcessTransport& operator=(const ChildProcessTransport&) = delete;

  ~ChildProcessTransport() override {
    if (write_fd_ >= 0) ::close(write_fd_);
    if (read_fd_ >= 0) ::close(read_fd_);
    if (pid_ > 0) {
      for (int i = 0; i < 50; ++i) {
        if (::waitpid(pid_, &status_, WNOHANG) == pid_) return;
        ::usleep(10000);
      }
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, &status_, 0);
    }
  }

  void send(const std::string& line) override {
    std::string buf = line + "\n";
    size_t off = 0;
    while (off < buf.size()) {
      ssize_t n = ::write(write_fd_, buf.data() + off, buf.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw ProtocolError(std::string("adapter write failed: ") + std::strerror(errno));
      }
      off += static_cast<size_t>(n);
    }
  }

  std::string receive(std::chrono::milliseconds timeout) override {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (true) {
      auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) throw TimeoutError("adapter did not answer within " + std::to_string(timeout.count()) + " ms");
      pollfd pfd{read_fd_, POLLIN, 0};
      int r = ::poll(&pfd, 1, static_cast<int>(left.count()));
      if (r < 0 && errno == EINTR) continue;
      if (r < 0) throw ProtocolError("poll failed");
      if (r == 0) continue;
      char chunk[65536];
      ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) throw ProtocolError("adapter closed its output");
      buffer_.append(chunk, static_cast<size_t>(n));
    }
  }

private:
  pid_t pid_ = -1;
  int write_fd_ = -1;
  int read_fd_ = -1;
  int status_ = 0;
  std::string buffer_;
};

// --- client ----------------------------------------------------------------------

struct Exchange {
  std::string request;
  std::string response;
};

using Transcript = std::vector<Exchange>;

// ModelOracle backed by an adapter. Requests are strictly serialized: each
// one waits for its response, which must echo the request id.
class OracleClient final : public ModelOracle {
public:
  explicit OracleClient(std::unique_ptr<LineTransport> transport,
                        std::chrono::milliseconds timeout = std::chrono::seconds(30))
      : transport_(std::move(transport)), timeout_(timeout) {}

  ~OracleClient() override {
    if (info_ && !closed_) {
      try {
        shutdown();
      } catch (...) {
      }
    }
  }

  OracleInfo handshake() {
    const json resp = call({{"op", "handshake"}});
    try {
      info_ = OracleInfo{resp.at("n_nodes").get<int>(), resp.at("feature_dim").get<int>(), resp.at("window").get<int>(),
                         resp.value("model_name", std::string())};
    } catch (const json::exception& e) {
      throw ProtocolError(std::string("handshake response: ") + e.what());
    }
    if (info_->n_nodes <= 0 || info_->feature_dim <= 0 || info_->window <= 0) {
      throw ProtocolError("handshake reported non-positive dimensions");
    }
    return *info_;
  }

  // Handshake, then reject adapters whose model does not fit the graph.
  OracleInfo handshake(const TemporalGraph& g) {
    const OracleInfo info = handshake();
    if (info.n_nodes != g.n_nodes() || info.feature_dim != g.feature_dim()) {
      throw MismatchError("adapter reports " + std::to_string(info.n_nodes) + " nodes x " +
                          std::to_string(info.feature_dim) + " features, graph has " + std::to_string(g.n_nodes()) +
                          " x " + std::to_string(g.feature_dim()));
    }
    if (info.window > g.steps()) throw MismatchError("adapter window exceeds the feature series");
    return info;
  }

  OracleInfo info() override {
    if (!info_) handshake();
    return *info_;
  }

  HiddenState hidden_state(std::span<const Matrix> x_seq) override {
    const json resp = call({{"op", "hidden_state"}, {"x_seq", encode_sequence(x_seq)}});
    if (!resp.contains("hidden")) throw ProtocolError("hidden_state response lacks 'hidden'");
    return {decode_matrix(resp.at("hidden"), "hidden")};
  }

  Prediction predict_with_hidden(const Matrix& x_last, const HiddenState& h) override {
    const json resp = call({{"op", "predict"}, {"x_last", encode_matrix(x_last)}, {"hidden", encode_matrix(h.h)}});
    if (!resp.contains("prediction")) throw ProtocolError("predict response lacks 'prediction'");
    Prediction p{decode_vector(resp.at("prediction"), "prediction")};
    if (info_ && p.y.size() != info_->n_nodes) throw ProtocolError("prediction length differs from n_nodes");
    return p;
  }

  void shutdown() {
    closed_ = true;
    call({{"op", "shutdown"}});
  }

  void record(bool on) { recording_ = on; }
  const Transcript& transcript() const { return transcript_; }

private:
  json call(json request) {
    const std::int64_t id = next_id_++;
    request["id"] = id;
    const std::string line = request.dump();
    transport_->send(line);
    std::string reply = transport_->receive(timeout_);
    if (recording_) transcript_.push_back({line, reply});
    json resp;
    try {
      resp = json::parse(reply);
    } catch (const json::exception& e) {
      throw ProtocolError(std::string("malformed response line: ") + e.what());
    }
    if (!resp.is_object() || !resp.contains("id") || !resp.at("id").is_number_integer()) {
      throw ProtocolError("response without an integer id");
    }
    if (resp.at("id").get<std::int64_t>() != id) {
      throw ProtocolError("response id " + resp.at("id").dump() + " does not match request id " + std::to_string(id));
    }
    if (!resp.value("ok", false)) {
      std::string msg = resp.contains("error") ? resp.at("error").dump() : "unspecified error";
      throw ProtocolError("adapter error: " + msg);
    }
    return resp;
  }

  std::unique_ptr<LineTransport> transport_;
  std::chrono::milliseconds timeout_;
  std::int64_t next_id_ = 0;
  std::optional<OracleInfo> info_;
  bool closed_ = false;
  bool recording_ = true;
  Transcript transcript_;
};

// --- transcripts and conformance ----------------------------------------------------

inline std::string transcript_text(const Transcript& t) {
  std::string out;
  for (const auto& e : t) out += "> " + e.request + "\n< " + e.response + "\n";
  return out;
}

inline Transcript parse_transcript(const std::string& text) {
  Transcript t;
  std::optional<std::string> pending;
  size_t lineno = 0;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t nl = text.find('\n', pos);
    std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = nl == std::string::npos ? text.size() : nl + 1;
    ++lineno;
    if (line.empty()) continue;
    if (line.rfind("> ", 0) == 0 && !pending) {
      pending = line.substr(2);
    } else if (line.rfind("< ", 0) == 0 && pending) {
      t.push_back({*pending, line.substr(2)});
      pending.reset();
    } else {
      throw ParseError("transcript line " + std::to_string(lineno) + " out of sequence");
    }
  }
  if (pending) throw ParseError("transcript ends with an unanswered request");
  return t;
}

struct ConformanceReport {
  std::vector<std::string> problems;
  double max_abs_diff = 0.0;
  bool ok() const { return problems.empty(); }
};

namespace detail {

inline double max_diff(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) return std::abs(a.get<double>() - b.get<double>());
  if (a.is_array() && b.is_array() && a.size() == b.size()) {
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, max_diff(a[i], b[i]));
    return m;
  }
  return std::numeric_limits<double>::infinity();
}

}  // namespace detail

// Checks protocol rules on a recorded transcript: handshake first, ids
// increasing from 0 and echoed, payload shapes consistent with the handshake.
// With a reference oracle, every request is replayed and numeric payloads
// must agree within `tolerance`.
inline ConformanceReport check_transcript(const Transcript& t, ModelOracle* reference = nullptr,
                                          double tolerance = 1e-5) {
  ConformanceReport rep;
  std::optional<AdapterServer> server;
  if (reference) server.emplace(*reference);
  std::optional<OracleInfo> info;
  std::int64_t expected_id = 0;
  std::optional<std::int64_t> hidden_cols;
  for (size_t i = 0; i < t.size(); ++i) {
    const std::string where = "exchange " + std::to_string(i) + ": ";
    json req, resp;
    try {
      req = json::parse(t[i].request);
      resp = json::parse(t[i].response);
    } catch (const json::exception& e) {
      rep.problems.push_back(where + "unparseable line: " + e.what());
      continue;
    }
    const std::int64_t id = req.value("id", std::int64_t{-1});
    if (id != expected_id) rep.problems.push_back(where + "request id " + std::to_string(id) + " out of order");
    expected_id = id + 1;
    if (!resp.contains("id") || resp.at("id") != req.value("id", json())) {
      rep.problems.push_back(where + "response does not echo the request id");
    }
    const std::string op = req.value("op", std::string());
    if (i == 0 && op != "handshake") rep.problems.push_back(where + "first request must be a handshake");
    if (!resp.value("ok", false)) {
      rep.problems.push_back(where + "adapter returned an error");
      continue;
    }
    try {
      if (op == "handshake") {
        info = OracleInfo{resp.at("n_nodes").get<int>(), resp.at("feature_dim").get<int>(),
                          resp.at("window").get<int>(), resp.value("model_name", std::string())};
      } else if (op == "hidden_state" && info) {
        auto in = shape_of(req.at("x_seq"), 3, "x_seq");
        if (in[0] != info->window || in[1] != info->n_nodes || in[2] != info->feature_dim) {
          rep.problems.push_back(where + "x_seq shape disagrees with handshake");
        }
        auto out = shape_of(resp.at("hidden"), 2, "hidden");
        if (out[0] != info->n_nodes) rep.problems.push_back(where + "hidden rows differ from n_nodes");
        if (hidden_cols && *hidden_cols != out[1]) rep.problems.push_back(where + "hidden width changed");
        hidden_cols = out[1];
      } else if (op == "predict" && info) {
        auto in = shape_of(req.at("x_last"), 2, "x_last");
        if (in[0] != info->n_nodes || in[1] != info->feature_dim) {
          rep.problems.push_back(where + "x_last shape disagrees with handshake");
        }
        auto out = shape_of(resp.at("prediction"), 1, "prediction");
        if (out[0] != info->n_nodes) rep.problems.push_back(where + "prediction length differs from n_nodes");
      } else if (op != "shutdown" && op != "handshake") {
        rep.problems.push_back(where + "unexpected op '" + op + "'");
      }
    } catch (const std::exception& e) {
      rep.problems.push_back(where + e.what());
      continue;
    }
    if (server && (op == "hidden_state" || op == "predict")) {
      const json expect = json::parse(server->handle(t[i].request));
      const char* key = op == "predict" ? "prediction" : "hidden";
      if (!expect.value("ok", false)) {
        rep.problems.push_back(where + "reference rejected the request");
        continue;
      }
      const double d = detail::max_diff(expect.at(key).at("data"), resp.at(key).at("data"));
      rep.max_abs_diff = std::max(rep.max_abs_diff, d);
      if (!(d <= tolerance)) {
        rep.problems.push_back(where + op + " differs from the reference by " + std::to_string(d));
      }
    }
  }
  if (!info) rep.problems.push_back("transcript has no handshake");
  return rep;
}

}  // namespace tgx::protocol
