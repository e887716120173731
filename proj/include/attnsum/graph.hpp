// Copyright 2026 The attnsum Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef ATTNSUM_GRAPH_HPP_
#define ATTNSUM_GRAPH_HPP_

// Sentence graphs from per-head CLS attention:
//   raw attention -> row softmax -> threshold -> undirected, no self-edges
//   -> D^-1/2 (A + I) D^-1/2

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "attnsum/bundle_io.hpp"
#include "attnsum/errors.hpp"
#include "attnsum/matrix.hpp"

namespace attnsum {

using BinaryMatrix = Matrix<std::uint8_t>;

/// Either a fixed tau in (0, 1) or "uniform", which resolves to 1/N.
class ThresholdPolicy {
 public:
  static ThresholdPolicy uniform() { return ThresholdPolicy(); }
  static ThresholdPolicy fixed(double tau) {
    check_tau(tau);
    ThresholdPolicy p;
    p.fixed_ = tau;
    return p;
  }

  /// Accepts "uniform" or a decimal number.
  static ThresholdPolicy parse(const std::string& text) {
    if (text == "uniform") return uniform();
    std::size_t used = 0;
    double tau = 0;
    try {
      tau = std::stod(text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != text.size())
      fail(ErrorKind::kConfig, "threshold must be 'uniform' or a number, got '" +
                                   text + "'");
    return fixed(tau);
  }

  bool is_uniform() const noexcept { return !fixed_.has_value(); }

  double resolve(std::size_t n) const {
    return fixed_ ? *fixed_ : 1.0 / static_cast<double>(n);
  }

  std::string to_string() const {
    if (!fixed_) return "uniform";
    std::ostringstream os;
    os << *fixed_;
    return os.str();
  }

  static void check_tau(double tau) {
    if (!(tau > 0.0 && tau < 1.0))
      fail(ErrorKind::kConfig, "threshold must lie in (0, 1)");
  }

 private:
  ThresholdPolicy() = default;
  std::optional<double> fixed_;
};

/// Row-wise softmax with max subtraction.
template <typename T>
Matrix<T> resoftmax_rows(const Matrix<T>& raw) {
  Matrix<T> out(raw.rows(), raw.cols());
  for (std::size_t i = 0; i < raw.rows(); ++i) {
    auto in = raw.row(i);
    for (T v : in)
      if (std::isnan(v)) fail(ErrorKind::kData, "NaN in attention");
    const T mx = *std::max_element(in.begin(), in.end());
    auto o = out.row(i);
    T sum{};
    for (std::size_t j = 0; j < in.size(); ++j) {
      o[j] = std::exp(in[j] - mx);
      sum += o[j];
    }
    for (auto& v : o) v /= sum;
  }
  return out;
}

template <typename T>
std::vector<Matrix<T>> resoftmax_rows(const std::vector<Matrix<T>>& raw) {
  std::vector<Matrix<T>> out;
  out.reserve(raw.size());
  for (const auto& m : raw) out.push_back(resoftmax_rows(m));
  return out;
}

/// Directed edges i -> j where stochastic(i, j) >= tau.
template <typename T>
BinaryMatrix binarize(const Matrix<T>& stochastic, double tau) {
  ThresholdPolicy::check_tau(tau);
  BinaryMatrix out(stochastic.rows(), stochastic.cols());
  for (std::size_t i = 0; i < stochastic.size(); ++i)
    out.flat()[i] = static_cast<double>(stochastic.flat()[i]) >= tau ? 1 : 0;
  return out;
}

/// OR with the transpose, then clear the diagonal.
inline BinaryMatrix symmetrize(const BinaryMatrix& directed) {
  require(directed.rows() == directed.cols(), ErrorKind::kContract,
          "symmetrize expects a square matrix");
  const std::size_t n = directed.rows();
  BinaryMatrix out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out(i, j) = (i != j && (directed(i, j) || directed(j, i))) ? 1 : 0;
  return out;
}

/// D^-1/2 (A + I) D^-1/2 with D the row sums of A + I.
template <typename T = double>
Matrix<T> normalize_adjacency(const BinaryMatrix& adj) {
  require(adj.rows() == adj.cols(), ErrorKind::kContract,
          "adjacency must be square");
  const std::size_t n = adj.rows();
  for (std::size_t i = 0; i < n; ++i) {
    if (adj(i, i) != 0)
      fail(ErrorKind::kContract, "adjacency diagonal must be zero");
    for (std::size_t j = 0; j < i; ++j)
      if (adj(i, j) != adj(j, i))
        fail(ErrorKind::kContract, "adjacency must be symmetric");
  }
  std::vector<T> inv_sqrt_deg(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t deg = 1;
    for (std::size_t j = 0; j < n; ++j) deg += adj(i, j) ? 1 : 0;
    inv_sqrt_deg[i] = T{1} / std::sqrt(static_cast<T>(deg));
  }
  Matrix<T> out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i == j || adj(i, j))
        out(i, j) = inv_sqrt_deg[i] * inv_sqrt_deg[j];
  return out;
}

template <typename T = double>
struct SentenceGraph {
  double threshold = 0.0;
  std::vector<Matrix<T>> stochastic_attention;
  std::vector<BinaryMatrix> binary_adjacency;
  std::vector<Matrix<T>> normalized_adjacency;

  std::size_t size() const noexcept {
    return normalized_adjacency.empty() ? 0 : normalized_adjacency[0].rows();
  }
  std::size_t heads() const noexcept { return normalized_adjacency.size(); }
};

/// Builds every head's graph from raw attention. A single-sentence document
/// skips thresholding (its only entry is the diagonal, which is cleared
/// anyway) and records tau = 0.5.
template <typename T = double>
SentenceGraph<T> build_graphs(const std::vector<Matrix<T>>& raw_attention,
                              const ThresholdPolicy& policy) {
  require(!raw_attention.empty(), ErrorKind::kContract, "no attention heads");
  const std::size_t n = raw_attention[0].rows();
  require(n > 0, ErrorKind::kContract, "empty attention matrix");
  SentenceGraph<T> g;
  g.threshold = n == 1 && policy.is_uniform() ? 0.5 : policy.resolve(n);
  ThresholdPolicy::check_tau(g.threshold);
  for (const auto& raw : raw_attention) {
    check_shape(raw, n, n, "raw attention head");
    auto stochastic = resoftmax_rows(raw);
    BinaryMatrix adj = n == 1 ? BinaryMatrix(1, 1)
                              : symmetrize(binarize(stochastic, g.threshold));
    g.normalized_adjacency.push_back(normalize_adjacency<T>(adj));
    g.binary_adjacency.push_back(std::move(adj));
    g.stochastic_attention.push_back(std::move(stochastic));
  }
  return g;
}

template <typename T = double>
SentenceGraph<T> build_graphs(const DocumentBundle& bundle,
                              const ThresholdPolicy& policy) {
  std::vector<Matrix<T>> raw;
  raw.reserve(bundle.heads());
  for (const auto& a : bundle.raw_attention) raw.push_back(a.template cast<T>());
  return build_graphs<T>(raw, policy);
}

// ---- inspection ----

inline std::size_t edge_count(const BinaryMatrix& undirected) {
  std::size_t e = 0;
  for (std::size_t i = 0; i < undirected.rows(); ++i)
    for (std::size_t j = i + 1; j < undirected.cols(); ++j)
      e += undirected(i, j) ? 1 : 0;
  return e;
}

/// degree -> number of nodes with that degree
inline std::map<std::size_t, std::size_t> degree_histogram(
    const BinaryMatrix& undirected) {
  std::map<std::size_t, std::size_t> hist;
  for (std::size_t i = 0; i < undirected.rows(); ++i) {
    std::size_t deg = 0;
    for (std::size_t j = 0; j < undirected.cols(); ++j)
      deg += undirected(i, j) ? 1 : 0;
    ++hist[deg];
  }
  return hist;
}

inline std::string to_dot(const BinaryMatrix& undirected,
                          const std::string& name = "sentences") {
  std::ostringstream os;
  os << "graph \"" << name << "\" {\n";
  for (std::size_t i = 0; i < undirected.rows(); ++i) os << "  s" << i << ";\n";
  for (std::size_t i = 0; i < undirected.rows(); ++i)
    for (std::size_t j = i + 1; j < undirected.cols(); ++j)
      if (undirected(i, j)) os << "  s" << i << " -- s" << j << ";\n";
  os << "}\n";
  return os.str();
}

}  // namespace attnsum

#endif  // ATTNSUM_GRAPH_HPP_
