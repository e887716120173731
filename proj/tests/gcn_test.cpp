// Copyright 2026 The attnsum Authors.
// SPDX-License-Identifier: Apache-2.0

#include "attnsum/gcn.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "attnsum/training.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace attnsum {
namespace {

using M = Matrix<double>;

GcnDims small_dims(std::size_t heads = 2) {
  GcnDims g;
  g.d = 5;
  g.heads = heads;
  g.d1 = 4;
  g.d2 = 3;
  g.dr = 6;
  return g;
}

std::vector<M> random_graphs(Rng& rng, std::size_t n, std::size_t heads) {
  std::vector<M> raw;
  for (std::size_t h = 0; h < heads; ++h) {
    M a(n, n);
    for (auto& v : a.flat()) v = rng.uniform();
    raw.push_back(std::move(a));
  }
  return build_graphs<double>(raw, ThresholdPolicy::uniform()).normalized_adjacency;
}

M random_features(Rng& rng, std::size_t n, std::size_t d) {
  M x(n, d);
  for (auto& v : x.flat()) v = rng.uniform(-1, 1);
  return x;
}

TEST(GcnLayer, IdentityConfiguration) {
  const M x(3, 3, {0.5, 1, 2, 0, 3, 0.25, 4, 0, 1});
  EXPECT_EQ(gcn_layer(x, M::identity(3), M::identity(3), M(1, 3)), x);
}

TEST(GcnLayer, HandComputed) {
  const auto out = gcn_layer(M(2, 1, {1, 1}), M(2, 2, 0.5), M(1, 1, 2.0), M(1, 1, -1.0));
  EXPECT_EQ(out, M(2, 1, {1, 1}));
}

TEST(GcnLayer, DeadLayerIsZero) {
  Rng rng(1);
  const auto x = random_features(rng, 4, 3);
  const auto adj = random_graphs(rng, 4, 1)[0];
  const auto out = gcn_layer(x, adj, M(3, 2), M(1, 2, -1.0));
  for (double v : out.flat()) EXPECT_EQ(v, 0.0);
}

TEST(GcnLayer, ShapeMismatchIsContractError) {
  try {
    gcn_layer(M(2, 3), M::identity(2), M(2, 2), M(1, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kContract);
  }
}

TEST(MultiHeadLayer, SingleHeadMatchesGcnLayer) {
  Rng rng(2);
  const auto x = random_features(rng, 5, 3);
  const auto adjs = random_graphs(rng, 5, 1);
  M w(3, 4), b(1, 4);
  for (auto& v : w.flat()) v = rng.uniform(-1, 1);
  for (auto& v : b.flat()) v = rng.uniform(-1, 1);
  EXPECT_EQ(multi_head_layer<double>(x, adjs, w, b), gcn_layer(x, adjs[0], w, b));
}

TEST(MultiHeadLayer, DuplicatedHeadsGiveEqualBlocksAndShapeLaw) {
  Rng rng(3);
  const auto x = random_features(rng, 3, 2);
  const auto adj = random_graphs(rng, 3, 1)[0];
  const std::vector<M> adjs{adj, adj};
  M w(2, 2), b(1, 2);
  for (auto& v : w.flat()) v = rng.uniform(-1, 1);
  const auto out = multi_head_layer<double>(x, adjs, w, b);
  EXPECT_EQ(out.rows(), 3u);
  EXPECT_EQ(out.cols(), 4u);
  EXPECT_EQ(column_block(out, 0, 2), column_block(out, 2, 2));
}

TEST(Readout, ZeroValuePath) {
  auto p = GcnParams<double>::zeros(small_dims(1));
  Rng rng(4);
  for (auto& v : p.wr1.flat()) v = rng.uniform(-1, 1);
  const auto r = readout(random_features(rng, 3, 3), random_features(rng, 3, 5), p);
  for (double v : r.flat()) EXPECT_EQ(v, 0.0);
}

TEST(Readout, NeutralGateHalvesValue) {
  auto p = GcnParams<double>::zeros(small_dims(1));
  Rng rng(5);
  for (auto& v : p.wr2.flat()) v = rng.uniform(-1, 1);
  for (auto& v : p.br2.flat()) v = rng.uniform(-1, 1);
  const auto h2 = random_features(rng, 3, 3);
  const auto r = readout(h2, random_features(rng, 3, 5), p);
  const auto value = affine(h2, p.wr2, p.br2);
  for (std::size_t i = 0; i < r.size(); ++i) EXPECT_DOUBLE_EQ(r.flat()[i], 0.5 * value.flat()[i]);
}

TEST(Readout, ScalarHandComputation) {
  GcnDims g;
  g.d = 1;
  g.heads = 1;
  g.d1 = 1;
  g.d2 = 1;
  g.dr = 1;
  auto p = GcnParams<double>::zeros(g);
  p.wr1 = M(2, 1, 1.0);
  p.wr2 = M(1, 1, 1.0);
  const auto r = readout(M(1, 1, 1.0), M(1, 1, 1.0), p);
  EXPECT_NEAR(r(0, 0), 0.880797, 1e-6);
  EXPECT_DOUBLE_EQ(r(0, 0), 1.0 / (1.0 + std::exp(-2.0)));
}

TEST(Readout, ConcatOrderIsH2ThenH0) {
  GcnDims g;
  g.d = 1;
  g.heads = 1;
  g.d1 = 1;
  g.d2 = 1;
  g.dr = 1;
  auto p = GcnParams<double>::zeros(g);
  p.wr1 = M(2, 1, {0.0, 100.0});  // only the H0 column opens the gate
  p.wr2 = M(1, 1, 1.0);
  const auto open = readout(M(1, 1, 1.0), M(1, 1, 1.0), p);
  const auto shut = readout(M(1, 1, 1.0), M(1, 1, -1.0), p);
  EXPECT_NEAR(open(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(shut(0, 0), 0.0, 1e-12);
}

TEST(Forward, ProbabilitiesAndDeterminism) {
  Rng rng(6);
  for (int t = 0; t < 10; ++t) {
    const auto dims = small_dims(1 + rng.below(3));
    const std::size_t n = 1 + rng.below(8);
    const auto adjs = random_graphs(rng, n, dims.heads);
    const auto x = random_features(rng, n, dims.d);
    const auto p = init_params<double>(dims, rng);
    const auto y = forward<double>(adjs, x, p);
    ASSERT_EQ(y.size(), n);
    for (double v : y) {
      EXPECT_TRUE(std::isfinite(v));
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
    }
    EXPECT_EQ(forward<double>(adjs, x, p), y);
  }
}

TEST(Forward, ConstantHead) {
  Rng rng(7);
  const auto dims = small_dims();
  auto p = init_params<double>(dims, rng);
  p.wo.fill(0);
  p.bo.fill(0);
  const auto y = forward<double>(random_graphs(rng, 4, 2), random_features(rng, 4, dims.d), p);
  for (double v : y) EXPECT_EQ(v, 0.5);
}

TEST(Forward, PermutationEquivariant) {
  Rng rng(8);
  for (int t = 0; t < 20; ++t) {
    const auto dims = small_dims(2);
    const std::size_t n = 2 + rng.below(7);
    const auto adjs = random_graphs(rng, n, dims.heads);
    const auto x = random_features(rng, n, dims.d);
    auto p = init_params<double>(dims, rng);
    for (auto& v : p.b1.flat()) v = rng.uniform(-0.1, 0.1);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::vector<M> padjs;
    for (const auto& a : adjs) padjs.push_back(oracle::permute_square(a, perm));
    const auto y = forward<double>(adjs, x, p);
    const auto py = forward<double>(padjs, oracle::permute_rows(x, perm), p);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(py[perm[i]], y[i], 1e-10);
  }
}

TEST(Forward, HeadCountMismatchIsContractError) {
  Rng rng(9);
  const auto p = init_params<double>(small_dims(2), rng);
  const auto adjs = random_graphs(rng, 3, 3);
  EXPECT_THROW(forward<double>(adjs, random_features(rng, 3, 5), p), Error);
}

TEST(GcnParams, SharedWeightsIndependentOfHeadCount) {
  const auto one = GcnParams<double>::zeros(small_dims(1));
  const auto two = GcnParams<double>::zeros(small_dims(2));
  EXPECT_EQ(one.w1.rows(), two.w1.rows());
  EXPECT_EQ(one.w1.cols(), two.w1.cols());
  EXPECT_EQ(one.w2.cols(), two.w2.cols());
  EXPECT_EQ(two.w2.rows(), 2 * one.w2.rows());
}

TEST(GcnParams, IdenticalHeadsGiveBitwiseEqualBlocks) {
  Rng rng(10);
  const auto dims = small_dims(3);
  const auto adj = random_graphs(rng, 5, 1)[0];
  const std::vector<M> adjs{adj, adj, adj};
  const auto p = init_params<double>(dims, rng);
  const auto t = forward_trace<double>(adjs, random_features(rng, 5, dims.d), p);
  for (std::size_t h = 1; h < 3; ++h) {
    EXPECT_EQ(column_block(t.h1, h * dims.d1, dims.d1), column_block(t.h1, 0, dims.d1));
    EXPECT_EQ(column_block(t.h2, h * dims.d2, dims.d2), column_block(t.h2, 0, dims.d2));
  }
}

TEST(CountParams, ClosedFormMatchesTensors) {
  GcnDims g;
  g.d = 4;
  g.heads = 2;
  g.d1 = 2;
  g.d2 = 2;
  g.dr = 3;
  EXPECT_EQ(count_params(g), 66u);
  EXPECT_EQ(GcnParams<double>::zeros(g).count(), 66u);
  EXPECT_EQ(count_params(GcnDims{}), 393729u);
  EXPECT_EQ(GcnParams<float>::zeros(GcnDims{}).count(), 393729u);
}

TEST(ModelFile, RoundTripAtFloatPrecision) {
  Rng rng(11);
  const auto dims = small_dims(2);
  const auto p = init_params<double>(dims, rng);
  const auto bytes = encode_model(p);
  EXPECT_EQ(bytes.substr(0, 4), "ATSM");
  EXPECT_EQ(bytes.size(), 4 + 6 * 4 + 4 * count_params(dims));
  const auto back = decode_model<double>(bytes);
  EXPECT_EQ(back.dims(), dims);
  EXPECT_EQ(back, p.cast<float>().cast<double>());
  EXPECT_EQ(encode_model(back), bytes);
}

TEST(ModelFile, CorruptionIsRejected) {
  Rng rng(12);
  const auto bytes = encode_model(init_params<double>(small_dims(2), rng));
  auto kind = [](const std::string& b) {
    try {
      decode_model<double>(b);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::kContract;
  };
  EXPECT_EQ(kind("XXXX" + bytes.substr(4)), ErrorKind::kFormat);
  EXPECT_EQ(kind(bytes.substr(0, bytes.size() - 4)), ErrorKind::kTruncation);
  EXPECT_EQ(kind(bytes + "abcd"), ErrorKind::kFormat);
  auto huge = bytes;
  huge[8] = huge[9] = huge[10] = huge[11] = '\xff';  // d = 2^32 - 1
  EXPECT_EQ(kind(huge), ErrorKind::kTruncation);
}

}  // namespace
}  // namespace attnsum
