// Copyright 2026 The attnsum Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef ATTNSUM_GCN_HPP_
#define ATTNSUM_GCN_HPP_

// Multi-head GCN sentence classifier.
//
//   H1 = concat_h relu(A_h (X  W1 + b1))        weights shared across heads
//   H2 = concat_h relu(A_h (H1 W2 + b2))
//   R  = sigmoid([H2 | X] Wr1 + br1) * (H2 Wr2 + br2)
//   y  = sigmoid(R Wo + bo)

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "attnsum/bundle_io.hpp"
#include "attnsum/errors.hpp"
#include "attnsum/graph.hpp"
#include "attnsum/matrix.hpp"

namespace attnsum {

struct GcnDims {
  std::size_t d = 768;   // encoder width
  std::size_t heads = 12;
  std::size_t d1 = 64;
  std::size_t d2 = 64;
  std::size_t dr = 128;

  void validate() const {
    require(d > 0 && heads > 0 && d1 > 0 && d2 > 0 && dr > 0,
            ErrorKind::kConfig, "all model dimensions must be positive");
  }

  bool operator==(const GcnDims&) const = default;
};

template <typename T>
struct GcnParams {
  Matrix<T> w1, b1;    // d x d1, 1 x d1
  Matrix<T> w2, b2;    // H*d1 x d2, 1 x d2
  Matrix<T> wr1, br1;  // (H*d2 + d) x dr, 1 x dr
  Matrix<T> wr2, br2;  // H*d2 x dr, 1 x dr
  Matrix<T> wo, bo;    // dr x 1, 1 x 1

  static GcnParams zeros(const GcnDims& dims) {
    dims.validate();
    const auto h = dims.heads;
    GcnParams p;
    p.w1 = Matrix<T>(dims.d, dims.d1);
    p.b1 = Matrix<T>(1, dims.d1);
    p.w2 = Matrix<T>(h * dims.d1, dims.d2);
    p.b2 = Matrix<T>(1, dims.d2);
    p.wr1 = Matrix<T>(h * dims.d2 + dims.d, dims.dr);
    p.br1 = Matrix<T>(1, dims.dr);
    p.wr2 = Matrix<T>(h * dims.d2, dims.dr);
    p.br2 = Matrix<T>(1, dims.dr);
    p.wo = Matrix<T>(dims.dr, 1);
    p.bo = Matrix<T>(1, 1);
    return p;
  }

  /// Recovers dims from tensor shapes.
  GcnDims dims() const {
    GcnDims g;
    g.d = w1.rows();
    g.d1 = w1.cols();
    g.d2 = w2.cols();
    g.dr = wr2.cols();
    g.heads = g.d1 == 0 ? 0 : w2.rows() / g.d1;
    return g;
  }

  /// Visits every tensor in file order.
  template <typename Fn>
  void for_each(Fn&& fn) {
    for (Matrix<T>* m : {&w1, &b1, &w2, &b2, &wr1, &br1, &wr2, &br2, &wo, &bo})
      fn(*m);
  }
  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (const Matrix<T>* m :
         {&w1, &b1, &w2, &b2, &wr1, &br1, &wr2, &br2, &wo, &bo})
      fn(*m);
  }

  std::size_t count() const {
    std::size_t n = 0;
    for_each([&](const Matrix<T>& m) { n += m.size(); });
    return n;
  }

  void check(const GcnDims& g) const {
    check_shape(w1, g.d, g.d1, "W1");
    check_shape(b1, 1, g.d1, "b1");
    check_shape(w2, g.heads * g.d1, g.d2, "W2");
    check_shape(b2, 1, g.d2, "b2");
    check_shape(wr1, g.heads * g.d2 + g.d, g.dr, "Wr1");
    check_shape(br1, 1, g.dr, "br1");
    check_shape(wr2, g.heads * g.d2, g.dr, "Wr2");
    check_shape(br2, 1, g.dr, "br2");
    check_shape(wo, g.dr, 1, "Wo");
    check_shape(bo, 1, 1, "bo");
  }

  template <typename U>
  GcnParams<U> cast() const {
    GcnParams<U> out;
    out.w1 = w1.template cast<U>();
    out.b1 = b1.template cast<U>();
    out.w2 = w2.template cast<U>();
    out.b2 = b2.template cast<U>();
    out.wr1 = wr1.template cast<U>();
    out.br1 = br1.template cast<U>();
    out.wr2 = wr2.template cast<U>();
    out.br2 = br2.template cast<U>();
    out.wo = wo.template cast<U>();
    out.bo = bo.template cast<U>();
    return out;
  }

  bool operator==(const GcnParams&) const = default;
};

/// Closed-form parameter count for a configuration.
inline std::size_t count_params(const GcnDims& g) {
  g.validate();
  return g.d * g.d1 + g.d1                          // W1, b1
         + (g.heads * g.d1) * g.d2 + g.d2           // W2, b2
         + (g.heads * g.d2 + g.d) * g.dr + g.dr     // Wr1, br1
         + (g.heads * g.d2) * g.dr + g.dr           // Wr2, br2
         + g.dr + 1;                                // Wo, bo
}

template <typename T>
T sigmoid(T x) {
  if (x >= T{0}) return T{1} / (T{1} + std::exp(-x));
  const T e = std::exp(x);
  return e / (T{1} + e);
}

template <typename T>
void relu_inplace(Matrix<T>& m) {
  for (auto& v : m.flat()) v = v > T{0} ? v : T{0};
}

/// relu(adj * (input * w + b))
template <typename T>
Matrix<T> gcn_layer(const Matrix<T>& input, const Matrix<T>& adj,
                    const Matrix<T>& w, const Matrix<T>& b) {
  check_shape(adj, input.rows(), input.rows(), "normalized adjacency");
  check_shape(w, input.cols(), w.cols(), "GCN weight");
  auto out = matmul(adj, affine(input, w, b));
  relu_inplace(out);
  return out;
}

/// The same (w, b) applied under every head's adjacency, outputs concatenated
/// along features in head order.
template <typename T>
Matrix<T> multi_head_layer(const Matrix<T>& input,
                           std::span<const Matrix<T>> adjs, const Matrix<T>& w,
                           const Matrix<T>& b) {
  require(!adjs.empty(), ErrorKind::kContract, "need at least one head");
  check_shape(w, input.cols(), w.cols(), "GCN weight");
  // The projection does not depend on the head, so compute it once.
  const Matrix<T> projected = affine(input, w, b);
  const std::size_t q = w.cols();
  Matrix<T> out(input.rows(), adjs.size() * q);
  for (std::size_t h = 0; h < adjs.size(); ++h) {
    check_shape(adjs[h], input.rows(), input.rows(), "normalized adjacency");
    auto block = matmul(adjs[h], projected);
    relu_inplace(block);
    set_column_block(out, h * q, block);
  }
  return out;
}

template <typename T>
Matrix<T> readout(const Matrix<T>& h2, const Matrix<T>& h0,
                  const GcnParams<T>& p) {
  require(h2.rows() == h0.rows(), ErrorKind::kContract,
          "readout row count mismatch");
  auto gate = affine(hconcat(h2, h0), p.wr1, p.br1);
  auto value = affine(h2, p.wr2, p.br2);
  for (std::size_t i = 0; i < gate.size(); ++i)
    value.flat()[i] *= sigmoid(gate.flat()[i]);
  return value;
}

/// Intermediate activations kept for the backward pass.
template <typename T>
struct ForwardTrace {
  Matrix<T> h1, h2, concat, gate, value, r;
  std::vector<T> y;  // probabilities
};

template <typename T>
ForwardTrace<T> forward_trace(std::span<const Matrix<T>> adjs,
                              const Matrix<T>& x, const GcnParams<T>& p) {
  const auto dims = p.dims();
  p.check(dims);
  check_shape(x, x.rows(), dims.d, "node features");
  require(adjs.size() == dims.heads, ErrorKind::kContract,
          "graph has " + std::to_string(adjs.size()) + " heads, model expects " +
              std::to_string(dims.heads));
  ForwardTrace<T> t;
  t.h1 = multi_head_layer(x, adjs, p.w1, p.b1);
  t.h2 = multi_head_layer(t.h1, adjs, p.w2, p.b2);
  t.concat = hconcat(t.h2, x);
  t.gate = affine(t.concat, p.wr1, p.br1);
  for (auto& v : t.gate.flat()) v = sigmoid(v);
  t.value = affine(t.h2, p.wr2, p.br2);
  t.r = t.value;
  for (std::size_t i = 0; i < t.r.size(); ++i) t.r.flat()[i] *= t.gate.flat()[i];
  const auto logits = affine(t.r, p.wo, p.bo);
  t.y.resize(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) t.y[i] = sigmoid(logits(i, 0));
  return t;
}

/// Per-sentence summary probabilities.
template <typename T>
std::vector<T> forward(const SentenceGraph<T>& graph, const Matrix<T>& x,
                       const GcnParams<T>& p) {
  return forward_trace<T>(graph.normalized_adjacency, x, p).y;
}

template <typename T>
std::vector<T> forward(std::span<const Matrix<T>> adjs, const Matrix<T>& x,
                       const GcnParams<T>& p) {
  return forward_trace<T>(adjs, x, p).y;
}

// ---- ATSM model files ----
//
//   "ATSM" | u32 version=1 | u32 d | u32 H | u32 d1 | u32 d2 | u32 dr |
//   f32 tensors in GcnParams field order, row-major, little-endian.

inline constexpr std::array<char, 4> kModelMagic = {'A', 'T', 'S', 'M'};
inline constexpr std::uint32_t kModelVersion = 1;

template <typename T>
std::string encode_model(const GcnParams<T>& params) {
  const auto dims = params.dims();
  params.check(dims);
  std::string out(kModelMagic.data(), kModelMagic.size());
  detail::put_u32(out, kModelVersion);
  for (auto v : {dims.d, dims.heads, dims.d1, dims.d2, dims.dr})
    detail::put_u32(out, detail::checked_u32(v, "model dimension"));
  params.for_each([&](const Matrix<T>& m) {
    for (T v : m.flat()) detail::put_f32(out, static_cast<float>(v));
  });
  return out;
}

/// Returns float-precision weights widened to T.
template <typename T = double>
GcnParams<T> decode_model(std::string_view buf) {
  detail::ByteReader in(buf);
  auto magic = in.bytes(4, "magic");
  if (!std::equal(magic.begin(), magic.end(), kModelMagic.begin()))
    fail(ErrorKind::kFormat, "bad model magic");
  const auto version = in.u32("version");
  if (version != kModelVersion)
    fail(ErrorKind::kFormat, "unsupported model version " + std::to_string(version));
  GcnDims dims;
  dims.d = in.u32("d");
  dims.heads = in.u32("H");
  dims.d1 = in.u32("d1");
  dims.d2 = in.u32("d2");
  dims.dr = in.u32("dr");
  try {
    dims.validate();
  } catch (const Error& e) {
    fail(ErrorKind::kFormat, e.message());
  }
  // Dimensions come from an untrusted header: size the payload in 128-bit
  // arithmetic before allocating anything.
  using Wide = unsigned __int128;
  const Wide d = dims.d, h = dims.heads, d1 = dims.d1, d2 = dims.d2,
             dr = dims.dr;
  const Wide expected = d * d1 + d1 + h * d1 * d2 + d2 + (h * d2 + d) * dr +
                        dr + h * d2 * dr + dr + dr + 1;
  const Wide available = in.remaining() / 4;
  if (expected > available)
    fail(ErrorKind::kTruncation, "model file shorter than its declared shape");
  if (expected < available || in.remaining() % 4 != 0)
    fail(ErrorKind::kFormat, "trailing bytes after model tensors");
  auto params = GcnParams<T>::zeros(dims);
  params.for_each([&](Matrix<T>& m) {
    for (auto& v : m.flat()) {
      const float f = in.f32("weight");
      if (!std::isfinite(f)) fail(ErrorKind::kData, "non-finite weight");
      v = static_cast<T>(f);
    }
  });
  return params;
}

template <typename T>
void save_model(const GcnParams<T>& params, const std::filesystem::path& path) {
  const auto bytes = encode_model(params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot open " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::kIo, "model write failed");
}

template <typename T = double>
GcnParams<T> load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open model " + path.string());
  std::string buf((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  return decode_model<T>(buf);
}

}  // namespace attnsum

#endif  // ATTNSUM_GCN_HPP_
