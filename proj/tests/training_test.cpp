// Copyright 2026 The attnsum Authors.
// SPDX-License-Identifier: Apache-2.0

#include "attnsum/training.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "attnsum/config.hpp"
#include "test_util.hpp"

namespace attnsum {
namespace {

using M = Matrix<double>;

TEST(BceLoss, AnalyticValues) {
  const std::vector<double> half(5, 0.5), y{1, 0, 1, 1, 0};
  EXPECT_NEAR(bce_loss<double>(half, y), std::log(2.0), 1e-15);
  const std::vector<double> p{0.9, 0.1}, l{1, 0};
  EXPECT_NEAR(bce_loss<double>(p, l), -std::log(0.9), 1e-15);
  EXPECT_NEAR(bce_loss<double>(p, l), 0.105361, 1e-6);
}

TEST(BceLoss, PerfectFitIsClampFloor) {
  const std::vector<double> y{1, 0, 0, 1};
  const double loss = bce_loss<double>(y, y);
  EXPECT_GE(loss, 0.0);
  EXPECT_LE(loss, -std::log(1 - 1e-7) + 1e-15);
}

TEST(BceLoss, LengthMismatchIsContractError) {
  const std::vector<double> a{0.5, 0.5}, b{1};
  try {
    bce_loss<double>(a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kContract);
  }
}

TEST(Backward, BiasGradientWithConstantHead) {
  const auto dims = grad_check_dims();
  auto inst = random_instance(dims, 3);
  inst.params.wo.fill(0);
  inst.params.bo.fill(0);
  const auto lg = backward<double>(inst.adjs, inst.x, inst.labels, inst.params);
  double expect = 0;
  for (double l : inst.labels) expect += 0.5 - l;
  expect /= static_cast<double>(inst.labels.size());
  EXPECT_NEAR(lg.grad.bo(0, 0), expect, 1e-15);
  // Nothing upstream of a zero output head receives gradient.
  for (const M* m : {&lg.grad.w1, &lg.grad.b1, &lg.grad.w2, &lg.grad.wr1, &lg.grad.wr2})
    for (double v : m->flat()) EXPECT_EQ(v, 0.0);
  // ... and finite differences agree in absolute terms.
  EXPECT_LT(grad_check(inst.params, inst), 1e-4);
}

TEST(Backward, LossMatchesForward) {
  const auto inst = random_instance(grad_check_dims(), 4);
  const auto lg = backward<double>(inst.adjs, inst.x, inst.labels, inst.params);
  EXPECT_EQ(lg.loss, bce_loss<double>(forward<double>(inst.adjs, inst.x, inst.params), inst.labels));
}

TEST(Backward, DuplicateHeadsSumIntoSharedWeights) {
  auto inst = random_instance(grad_check_dims(), 5);
  inst.adjs[1] = inst.adjs[0];
  EXPECT_LT(grad_check(inst.params, inst), 1e-4);
}

TEST(GradCheck, RandomSeedsPass) {
  for (std::uint64_t seed = 0; seed < 5; ++seed)
    EXPECT_LT(grad_check(grad_check_dims(), seed), 1e-4) << "seed " << seed;
}

TEST(GradCheck, DetectsCorruptedGradient) {
  const GradientFn corrupted = [](std::span<const M> adjs, const M& x,
                                  std::span<const double> y, const GcnParams<double>& p) {
    auto g = analytic_gradient(adjs, x, y, p);
    g.w1(0, 0) += 0.5;
    return g;
  };
  EXPECT_GT(grad_check(grad_check_dims(), 1, corrupted), 1e-2);
  const GradientFn transposed_bug = [](std::span<const M> adjs, const M& x,
                                       std::span<const double> y, const GcnParams<double>& p) {
    auto g = analytic_gradient(adjs, x, y, p);
    for (auto& v : g.wr2.flat()) v *= -1;
    return g;
  };
  EXPECT_GT(grad_check(grad_check_dims(), 1, transposed_bug), 1e-2);
}

TEST(GradientError, FloorMakesTinyGradientsAbsolute) {
  EXPECT_DOUBLE_EQ(gradient_error(0.0, 5e-9), 5e-5);
  EXPECT_DOUBLE_EQ(gradient_error(2.0, 1.0), 0.5);
}

GcnDims tiny_dims() {
  GcnDims g;
  g.d = 2;
  g.heads = 1;
  g.d1 = 2;
  g.d2 = 2;
  g.dr = 2;
  return g;
}

GcnParams<double> constant_params(const GcnDims& dims, double v) {
  auto p = GcnParams<double>::zeros(dims);
  p.for_each([&](M& m) { m.fill(v); });
  return p;
}

TEST(Adam, ZeroGradientIsNoOp) {
  const auto dims = tiny_dims();
  auto params = constant_params(dims, 0.3);
  const auto before = params;
  auto state = AdamState<double>::zeros(dims);
  const auto zero = GcnParams<double>::zeros(dims);
  for (int i = 0; i < 3; ++i) adam_step(params, zero, state, AdamHyper{});
  EXPECT_EQ(params, before);
  EXPECT_EQ(state.t, 3u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  const auto dims = tiny_dims();
  auto params = constant_params(dims, 0.0);
  auto state = AdamState<double>::zeros(dims);
  auto grads = constant_params(dims, 0.5);
  grads.w1(0, 0) = -0.5;
  const AdamHyper hp;
  adam_step(params, grads, state, hp);
  EXPECT_EQ(state.t, 1u);
  params.for_each([&](const M& m) {
    for (double v : m.flat()) {
      EXPECT_LE(std::abs(v), hp.learning_rate);
      EXPECT_GE(std::abs(v), hp.learning_rate * (1 - 1e-6));
    }
  });
  EXPECT_GT(params.w1(0, 0), 0.0);
  EXPECT_LT(params.w1(0, 1), 0.0);
}

TEST(Adam, MomentsDecayGeometricallyUnderZeroGradient) {
  const auto dims = tiny_dims();
  auto params = constant_params(dims, 0.0);
  auto state = AdamState<double>::zeros(dims);
  const AdamHyper hp;
  adam_step(params, constant_params(dims, 2.0), state, hp);
  const auto m1 = state.m.wo(0, 0), v1 = state.v.wo(0, 0);
  EXPECT_DOUBLE_EQ(m1, (1 - hp.beta1) * 2.0);
  EXPECT_DOUBLE_EQ(v1, (1 - hp.beta2) * 4.0);
  const auto after_first = params;
  const auto zero = GcnParams<double>::zeros(dims);
  adam_step(params, zero, state, hp);
  adam_step(params, zero, state, hp);
  EXPECT_DOUBLE_EQ(state.m.wo(0, 0), m1 * hp.beta1 * hp.beta1);
  EXPECT_DOUBLE_EQ(state.v.wo(0, 0), v1 * hp.beta2 * hp.beta2);
  EXPECT_EQ(params, after_first);
  EXPECT_EQ(state.t, 3u);
}

TEST(InitParams, GlorotBoundsAndZeroBiases) {
  Rng rng(1);
  const auto dims = grad_check_dims();
  const auto p = init_params<double>(dims, rng);
  for (const M* w : {&p.w1, &p.w2, &p.wr1, &p.wr2, &p.wo}) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w->rows() + w->cols()));
    for (double v : w->flat()) EXPECT_LE(std::abs(v), limit);
  }
  for (const M* b : {&p.b1, &p.b2, &p.br1, &p.br2, &p.bo})
    for (double v : b->flat()) EXPECT_EQ(v, 0.0);
  Rng again(1);
  EXPECT_EQ(init_params<double>(dims, again), p);
}

std::vector<TrainingExample> separable_examples(std::size_t docs, std::size_t n,
                                                std::size_t d, std::size_t heads,
                                                std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> w(d);
  for (auto& v : w) v = rng.uniform(-1, 1);
  std::vector<TrainingExample> out;
  for (std::size_t k = 0; k < docs; ++k) {
    auto b = testing::random_bundle(rng, "doc" + std::to_string(k), n, d, heads);
    std::vector<double> score(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) score[i] += w[j] * b.embeddings(i, j);
    b.labels = std::vector<std::uint8_t>(n, 0);
    for (std::size_t i = 0; i < n; ++i) (*b.labels)[i] = score[i] > 0 ? 1 : 0;
    out.push_back(prepare_example(b, ThresholdPolicy::uniform()));
  }
  return out;
}

TrainConfig small_config() {
  TrainConfig c;
  c.dims.d = 6;
  c.dims.heads = 2;
  c.dims.d1 = 8;
  c.dims.d2 = 8;
  c.dims.dr = 8;
  c.epochs = 60;
  c.learning_rate = 5e-3;
  c.seed = 3;
  return c;
}

TEST(Train, LossDecreasesAndIsDeterministic) {
  auto cfg = small_config();
  cfg.validation_fraction = 0;
  cfg.patience = 0;
  const auto examples = separable_examples(6, 5, 6, 2, 21);
  const auto a = train(examples, cfg);
  ASSERT_EQ(a.history.size(), cfg.epochs);
  EXPECT_LT(a.history.back().train_loss, 0.5 * a.history.front().train_loss);
  EXPECT_FALSE(a.history.back().val_loss.has_value());
  const auto b = train(examples, cfg);
  EXPECT_EQ(encode_model(a.params), encode_model(b.params));
  EXPECT_EQ(history_csv(a.history), history_csv(b.history));
  cfg.seed = 4;
  EXPECT_NE(encode_model(train(examples, cfg).params), encode_model(a.params));
}

TEST(Train, ValidationSplitAndEarlyStopping) {
  auto cfg = small_config();
  cfg.validation_fraction = 0.3;
  cfg.patience = 2;
  cfg.epochs = 400;
  cfg.learning_rate = 5e-2;  // overfits fast, so validation loss turns up
  const auto r = train(separable_examples(10, 4, 6, 2, 22), cfg);
  ASSERT_FALSE(r.history.empty());
  EXPECT_TRUE(r.history.front().val_loss.has_value());
  EXPECT_LT(r.history.size(), cfg.epochs);
  EXPECT_EQ(r.history.size(), r.best_epoch + cfg.patience);
  double best = 1e300;
  for (const auto& s : r.history) best = std::min(best, *s.val_loss);
  EXPECT_EQ(*r.history[r.best_epoch - 1].val_loss, best);
}

TEST(Train, TargetLossStopsEarly) {
  auto cfg = small_config();
  cfg.validation_fraction = 0;
  cfg.patience = 0;
  cfg.epochs = 1000;
  cfg.target_loss = 0.3;
  const auto r = train(separable_examples(6, 5, 6, 2, 23), cfg);
  EXPECT_LT(r.history.back().train_loss, 0.3);
  EXPECT_LT(r.history.size(), cfg.epochs);
}

TEST(Train, ErrorsOnEmptyOrUnlabelledCorpus) {
  try {
    train({}, small_config());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kData);
  }
  Rng rng(1);
  const auto b = testing::random_bundle(rng, "nolabels", 3, 6, 2);
  try {
    prepare_example(b, ThresholdPolicy::uniform());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kData);
    EXPECT_NE(std::string(e.what()).find("nolabels"), std::string::npos);
  }
}

TEST(Train, EmptyCorpusDirectoryWritesNoModel) {
  testing::TempDir dir("train-empty");
  std::filesystem::create_directories(dir / "corpus");
  EXPECT_THROW(train_corpus(dir / "corpus", small_config(), dir / "model.atsm"), Error);
  EXPECT_FALSE(std::filesystem::exists(dir / "model.atsm"));
}

TEST(Train, DimensionMismatchIsDataError) {
  auto cfg = small_config();
  cfg.dims.d = 7;
  EXPECT_THROW(train(separable_examples(2, 3, 6, 2, 1), cfg), Error);
}

TEST(HistoryCsv, Format) {
  std::vector<EpochStats> h{{1, 0.5, 0.25}, {2, 0.125, std::nullopt}};
  EXPECT_EQ(history_csv(h),
            "epoch,train_loss,val_loss\n1,0.500000000,0.250000000\n2,0.125000000,\n");
}

TEST(Config, ParsesKnownKeysAndRejectsOthers) {
  const auto loaded = parse_config(nlohmann::json::parse(
      R"({"d": 16, "heads": 2, "d1": 3, "threshold": 0.2, "learning_rate": 0.01,
          "epochs": 5, "seed": 9, "validation_fraction": 0, "patience": 0})"));
  EXPECT_EQ(loaded.config.dims.d, 16u);
  EXPECT_EQ(loaded.config.dims.d1, 3u);
  EXPECT_EQ(loaded.config.dims.dr, 128u);
  EXPECT_DOUBLE_EQ(loaded.config.threshold.resolve(3), 0.2);
  EXPECT_EQ(loaded.config.seed, 9u);
  EXPECT_TRUE(loaded.keys.contains("heads"));
  EXPECT_FALSE(loaded.keys.contains("dr"));
  EXPECT_TRUE(parse_config(nlohmann::json::parse(R"({"threshold": "uniform"})"))
                  .config.threshold.is_uniform());
  for (const char* bad : {R"({"bogus": 1})", R"({"learning_rate": -1})",
                          R"({"validation_fraction": 1.0})", R"({"d": "x"})", "[1]"}) {
    try {
      parse_config(nlohmann::json::parse(bad));
      FAIL() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kConfig) << bad;
    }
  }
}

}  // namespace
}  // namespace attnsum
