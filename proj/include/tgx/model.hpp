#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tgx/csv.hpp"
#include "tgx/error.hpp"
#include "tgx/rng.hpp"
#include "tgx/temporal_graph.hpp"

namespace tgx {

using RowVector = Eigen::RowVectorXd;

// Parameters of the graph-gated recurrent cell. Gate weights act on the
// column concatenation [A X, H], so each has (feature_dim + hidden_dim) rows.
struct ModelWeights {
  int feature_dim = 1;
  int hidden_dim = 1;
  Matrix w_update, w_reset, w_candidate;
  RowVector b_update, b_reset, b_candidate;
  Vector w_out;
  double b_out = 0.0;

  static ModelWeights zeros(int feature_dim, int hidden_dim) {
    const int in = feature_dim + hidden_dim;
    ModelWeights w;
    w.feature_dim = feature_dim;
    w.hidden_dim = hidden_dim;
    w.w_update = w.w_reset = w.w_candidate = Matrix::Zero(in, hidden_dim);
    w.b_update = w.b_reset = w.b_candidate = RowVector::Zero(hidden_dim);
    w.w_out = Vector::Zero(hidden_dim);
    return w;
  }

  void validate() const {
    const Eigen::Index in = feature_dim + hidden_dim, h = hidden_dim;
    if (feature_dim <= 0 || hidden_dim <= 0) throw ShapeError("model dimensions must be positive");
    for (const Matrix* m : {&w_update, &w_reset, &w_candidate}) {
      if (m->rows() != in || m->cols() != h) throw ShapeError("gate weight has wrong shape");
      if (!m->allFinite()) throw ValueError("gate weight is not finite");
    }
    for (const RowVector* b : {&b_update, &b_reset, &b_candidate}) {
      if (b->size() != h) throw ShapeError("gate bias has wrong length");
      if (!b->allFinite()) throw ValueError("gate bias is not finite");
    }
    if (w_out.size() != h) throw ShapeError("output projection has wrong length");
    if (!w_out.allFinite() || !std::isfinite(b_out)) throw ValueError("output head is not finite");
  }

  bool operator==(const ModelWeights& o) const {
    return feature_dim == o.feature_dim && hidden_dim == o.hidden_dim && w_update == o.w_update &&
           w_reset == o.w_reset && w_candidate == o.w_candidate && b_update == o.b_update &&
           b_reset == o.b_reset && b_candidate == o.b_candidate && w_out == o.w_out && b_out == o.b_out;
  }
};

struct HiddenState {
  Matrix h;  // n_nodes x hidden_dim
};

struct Prediction {
  Vector y;  // one value per node
};

namespace detail {

inline Matrix logistic(const Matrix& x) { return (1.0 + (-x.array()).exp()).inverse().matrix(); }

inline void check_step_shapes(const ModelWeights& w, const NormalizedAdjacency& a, const Matrix& x,
                              const Matrix& h) {
  const auto n = a.matrix.rows();
  if (a.matrix.cols() != n) throw ShapeError("normalized adjacency is not square");
  if (x.rows() != n || x.cols() != w.feature_dim) {
    throw ShapeError("input frame is " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                     ", expected " + std::to_string(n) + "x" + std::to_string(w.feature_dim));
  }
  if (h.rows() != n || h.cols() != w.hidden_dim) {
    throw ShapeError("hidden state is " + std::to_string(h.rows()) + "x" + std::to_string(h.cols()) +
                     ", expected " + std::to_string(n) + "x" + std::to_string(w.hidden_dim));
  }
}

}  // namespace detail

inline HiddenState zero_hidden(const ModelWeights& w, int n_nodes) {
  return {Matrix::Zero(n_nodes, w.hidden_dim)};
}

// One recurrent update:
//   Z = A X;  u = σ([Z,H] Wu + bu);  r = σ([Z,H] Wr + br)
//   c = tanh([Z, r∘H] Wc + bc);  H' = u∘H + (1-u)∘c
inline HiddenState step(const ModelWeights& w, const NormalizedAdjacency& a, const Matrix& x,
                        const HiddenState& prev) {
  detail::check_step_shapes(w, a, x, prev.h);
  const auto n = x.rows();
  const Matrix z = a.matrix * x;
  Matrix zh(n, w.feature_dim + w.hidden_dim);
  zh << z, prev.h;
  const Matrix u = detail::logistic((zh * w.w_update).rowwise() + w.b_update);
  const Matrix r = detail::logistic((zh * w.w_reset).rowwise() + w.b_reset);
  Matrix zrh(n, w.feature_dim + w.hidden_dim);
  zrh << z, r.cwiseProduct(prev.h);
  const Matrix c = ((zrh * w.w_candidate).rowwise() + w.b_candidate).array().tanh().matrix();
  return {u.cwiseProduct(prev.h) + (Matrix::Ones(n, w.hidden_dim) - u).cwiseProduct(c)};
}

inline Prediction readout(const ModelWeights& w, const HiddenState& h) {
  return {(h.h * w.w_out).array() + w.b_out};
}

// Runs the recurrence over all but the last frame of the window, from H0 = 0.
inline HiddenState hidden_state(const ModelWeights& w, const NormalizedAdjacency& a,
                                std::span<const Matrix> x_seq) {
  if (x_seq.empty()) throw ShapeError("input window is empty");
  HiddenState h = zero_hidden(w, static_cast<int>(a.matrix.rows()));
  for (size_t i = 0; i + 1 < x_seq.size(); ++i) h = step(w, a, x_seq[i], h);
  return h;
}

// Last computation of the window with the hidden state held fixed.
inline Prediction predict_with_hidden(const ModelWeights& w, const NormalizedAdjacency& a, const Matrix& x_last,
                                      const HiddenState& h) {
  return readout(w, step(w, a, x_last, h));
}

struct ForwardResult {
  Prediction prediction;
  HiddenState last_hidden;  // state entering the final step
};

inline ForwardResult forward_full(const ModelWeights& w, const NormalizedAdjacency& a,
                                  std::span<const Matrix> x_seq) {
  HiddenState h = hidden_state(w, a, x_seq);
  Prediction y = predict_with_hidden(w, a, x_seq.back(), h);
  return {std::move(y), std::move(h)};
}

// Single-pass forward over the whole window. Gate products are split into
// input and recurrent blocks instead of multiplying a concatenated matrix, so
// this shares no arithmetic path with step(); it serves as the independent
// route for checking the sequential decomposition.
inline Prediction forward_fused(const ModelWeights& w, const NormalizedAdjacency& a,
                                std::span<const Matrix> x_seq) {
  if (x_seq.empty()) throw ShapeError("input window is empty");
  const auto n = a.matrix.rows();
  const int f = w.feature_dim, hd = w.hidden_dim;
  const auto wu_x = w.w_update.topRows(f), wu_h = w.w_update.bottomRows(hd);
  const auto wr_x = w.w_reset.topRows(f), wr_h = w.w_reset.bottomRows(hd);
  const auto wc_x = w.w_candidate.topRows(f), wc_h = w.w_candidate.bottomRows(hd);
  Matrix h = Matrix::Zero(n, hd);
  for (const Matrix& x : x_seq) {
    detail::check_step_shapes(w, a, x, h);
    Matrix next(n, hd);
    for (Eigen::Index i = 0; i < n; ++i) {
      RowVector z = a.matrix.row(i) * x;
      RowVector hu = z * wu_x + h.row(i) * wu_h + w.b_update;
      RowVector hr = z * wr_x + h.row(i) * wr_h + w.b_reset;
      for (Eigen::Index k = 0; k < hd; ++k) {
        hu(k) = 1.0 / (1.0 + std::exp(-hu(k)));
        hr(k) = 1.0 / (1.0 + std::exp(-hr(k)));
      }
      RowVector gated = hr.cwiseProduct(h.row(i));
      RowVector hc = z * wc_x + gated * wc_h + w.b_candidate;
      for (Eigen::Index k = 0; k < hd; ++k) {
        next(i, k) = hu(k) * h(i, k) + (1.0 - hu(k)) * std::tanh(hc(k));
      }
    }
    h = std::move(next);
  }
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = h.row(i).dot(w.w_out.transpose()) + w.b_out;
  return {y};
}

// Deterministic weights uniform in [-0.5, 0.5].
inline ModelWeights synth_model(int feature_dim, int hidden_dim, std::uint64_t seed) {
  ModelWeights w = ModelWeights::zeros(feature_dim, hidden_dim);
  SplitMix64 gen(seed);
  auto fill = [&](auto& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = gen.uniform() - 0.5;
  };
  fill(w.w_update);
  fill(w.w_reset);
  fill(w.w_candidate);
  fill(w.b_update);
  fill(w.b_reset);
  fill(w.b_candidate);
  fill(w.w_out);
  w.b_out = gen.uniform() - 0.5;
  return w;
}

// Weights plus the metadata an adapter reports on handshake.
struct ModelCard {
  std::string name = "tgcn";
  int n_nodes = 0;
  int window = 1;
  ModelWeights weights;
};

namespace detail {

inline nlohmann::json array_json(const Matrix& m) {
  nlohmann::json data = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  return {{"shape", {m.rows(), m.cols()}}, {"data", data}};
}

inline Matrix array_from_json(const nlohmann::json& j, const std::string& name, Eigen::Index rows,
                              Eigen::Index cols) {
  if (!j.contains("shape") || !j.contains("data")) throw ParseError("array '" + name + "' needs shape and data");
  auto shape = j.at("shape").get<std::vector<Eigen::Index>>();
  Eigen::Index r = shape.size() > 0 ? shape[0] : 0, c = shape.size() > 1 ? shape[1] : 1;
  if (shape.size() > 2 || r != rows || c != cols) {
    throw ShapeError("array '" + name + "' has shape " + j.at("shape").dump() + ", expected [" +
                     std::to_string(rows) + "," + std::to_string(cols) + "]");
  }
  const auto& data = j.at("data");
  if (!data.is_array() || static_cast<Eigen::Index>(data.size()) != r * c) {
    throw ShapeError("array '" + name + "' data length does not match shape");
  }
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index k = 0; k < c; ++k) m(i, k) = data[static_cast<size_t>(i * c + k)].get<double>();
  return m;
}

}  // namespace detail

inline std::string weights_document(const ModelCard& card) {
  const ModelWeights& w = card.weights;
  nlohmann::ordered_json doc;
  doc["format_version"] = 1;
  doc["model_name"] = card.name;
  doc["n_nodes"] = card.n_nodes;
  doc["window"] = card.window;
  doc["feature_dim"] = w.feature_dim;
  doc["hidden_dim"] = w.hidden_dim;
  nlohmann::ordered_json arrays;
  arrays["W_u"] = detail::array_json(w.w_update);
  arrays["W_r"] = detail::array_json(w.w_reset);
  arrays["W_c"] = detail::array_json(w.w_candidate);
  arrays["b_u"] = detail::array_json(w.b_update);
  arrays["b_r"] = detail::array_json(w.b_reset);
  arrays["b_c"] = detail::array_json(w.b_candidate);
  arrays["W_o"] = detail::array_json(w.w_out);
  arrays["b_o"] = detail::array_json(Matrix::Constant(1, 1, w.b_out));
  doc["arrays"] = arrays;
  return doc.dump(1) + "\n";
}

inline ModelCard parse_weights_document(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("weights document: ") + e.what());
  }
  try {
    if (doc.value("format_version", 0) != 1) throw ParseError("weights document: unsupported format_version");
    ModelCard card;
    card.name = doc.value("model_name", std::string("tgcn"));
    card.n_nodes = doc.at("n_nodes").get<int>();
    card.window = doc.at("window").get<int>();
    const int f = doc.at("feature_dim").get<int>(), h = doc.at("hidden_dim").get<int>();
    if (f <= 0 || h <= 0 || card.window <= 0 || card.n_nodes <= 0) {
      throw ShapeError("weights document: dimensions must be positive");
    }
    const auto& a = doc.at("arrays");
    ModelWeights& w = card.weights;
    w.feature_dim = f;
    w.hidden_dim = h;
    w.w_update = detail::array_from_json(a.at("W_u"), "W_u", f + h, h);
    w.w_reset = detail::array_from_json(a.at("W_r"), "W_r", f + h, h);
    w.w_candidate = detail::array_from_json(a.at("W_c"), "W_c", f + h, h);
    w.b_update = detail::array_from_json(a.at("b_u"), "b_u", 1, h);
    w.b_reset = detail::array_from_json(a.at("b_r"), "b_r", 1, h);
    w.b_candidate = detail::array_from_json(a.at("b_c"), "b_c", 1, h);
    w.w_out = detail::array_from_json(a.at("W_o"), "W_o", h, 1);
    w.b_out = detail::array_from_json(a.at("b_o"), "b_o", 1, 1)(0, 0);
    w.validate();
    return card;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("weights document: ") + e.what());
  }
}

inline ModelCard load_weights(const std::filesystem::path& path) {
  return parse_weights_document(csv::read_file(path));
}

inline void save_weights(const ModelCard& card, const std::filesystem::path& path) {
  csv::write_atomic(path, weights_document(card));
}

struct OracleInfo {
  int n_nodes = 0;
  int feature_dim = 0;
  int window = 1;
  std::string model_name;

  bool operator==(const OracleInfo&) const = default;
};

// Black-box access to a trained temporal model, split at its last step.
// hidden_state() receives the full input window and consumes all but the last frame.
class ModelOracle {
public:
  virtual ~ModelOracle() = default;
  virtual OracleInfo info() = 0;
  virtual HiddenState hidden_state(std::span<const Matrix> x_seq) = 0;
  virtual Prediction predict_with_hidden(const Matrix& x_last, const HiddenState& h) = 0;
};

class EmbeddedOracle final : public ModelOracle {
public:
  EmbeddedOracle(ModelCard card, NormalizedAdjacency a) : card_(std::move(card)), a_(std::move(a)) {
    card_.weights.validate();
    if (card_.n_nodes != a_.matrix.rows()) {
      throw DimensionError("model expects " + std::to_string(card_.n_nodes) + " nodes, graph has " +
                           std::to_string(a_.matrix.rows()));
    }
  }

  OracleInfo info() override {
    return {card_.n_nodes, card_.weights.feature_dim, card_.window, card_.name};
  }
  HiddenState hidden_state(std::span<const Matrix> x_seq) override {
    return tgx::hidden_state(card_.weights, a_, x_seq);
  }
  Prediction predict_with_hidden(const Matrix& x_last, const HiddenState& h) override {
    return tgx::predict_with_hidden(card_.weights, a_, x_last, h);
  }

  const ModelCard& card() const { return card_; }
  const NormalizedAdjacency& adjacency() const { return a_; }

private:
  ModelCard card_;
  NormalizedAdjacency a_;
};

}  // namespace tgx
