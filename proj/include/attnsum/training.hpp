// Copyright 2026 The attnsum Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef ATTNSUM_TRAINING_HPP_
#define ATTNSUM_TRAINING_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "attnsum/bundle_io.hpp"
#include "attnsum/errors.hpp"
#include "attnsum/gcn.hpp"
#include "attnsum/graph.hpp"
#include "attnsum/matrix.hpp"
#include "attnsum/parallel.hpp"
#include "attnsum/random.hpp"

namespace attnsum {

struct TrainConfig {
  GcnDims dims;
  ThresholdPolicy threshold = ThresholdPolicy::uniform();
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t epochs = 50;
  std::uint64_t seed = 0;
  // 0 disables the split; model selection then uses the training loss.
  double validation_fraction = 0.1;
  // Epochs without improvement before stopping; 0 disables early stopping.
  std::size_t patience = 3;
  double clamp_eps = 1e-7;
  // Stop once the epoch training loss is below this; 0 disables.
  double target_loss = 0.0;

  void validate() const {
    dims.validate();
    require(learning_rate > 0, ErrorKind::kConfig, "learning_rate must be > 0");
    require(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1,
            ErrorKind::kConfig, "adam betas must lie in [0, 1)");
    require(epsilon > 0, ErrorKind::kConfig, "epsilon must be > 0");
    require(validation_fraction >= 0 && validation_fraction < 1,
            ErrorKind::kConfig, "validation_fraction must lie in [0, 1)");
    require(clamp_eps > 0 && clamp_eps < 0.5, ErrorKind::kConfig,
            "clamp_eps must lie in (0, 0.5)");
    require(target_loss >= 0, ErrorKind::kConfig, "target_loss must be >= 0");
  }
};

/// Mean binary cross-entropy with probabilities clamped to [eps, 1 - eps].
template <typename T>
T bce_loss(std::span<const T> probs, std::span<const T> labels,
           T clamp_eps = T(1e-7)) {
  require(probs.size() == labels.size(), ErrorKind::kContract,
          "prediction and label lengths differ");
  require(!probs.empty(), ErrorKind::kContract, "empty prediction");
  T sum{};
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const T p = std::clamp(probs[i], clamp_eps, T{1} - clamp_eps);
    sum -= labels[i] * std::log(p) + (T{1} - labels[i]) * std::log(T{1} - p);
  }
  return sum / static_cast<T>(probs.size());
}

template <typename T>
struct LossAndGrad {
  T loss{};
  GcnParams<T> grad;
};

/// Exact reverse-mode gradient of bce_loss(forward(...)) for every tensor.
template <typename T>
LossAndGrad<T> backward(std::span<const Matrix<T>> adjs, const Matrix<T>& x,
                        std::span<const T> labels, const GcnParams<T>& p,
                        T clamp_eps = T(1e-7)) {
  const auto dims = p.dims();
  const std::size_t n = x.rows();
  const std::size_t heads = adjs.size();
  require(labels.size() == n, ErrorKind::kContract, "label length mismatch");
  const auto t = forward_trace<T>(adjs, x, p);

  LossAndGrad<T> out;
  out.loss = bce_loss<T>(t.y, labels, clamp_eps);
  out.grad = GcnParams<T>::zeros(dims);
  auto& g = out.grad;

  // d loss / d logit. Inside the clamp window BCE through the sigmoid gives
  // (y - label) / N; outside it the clamp is flat.
  Matrix<T> dlogit(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    const T y = t.y[i];
    const bool live = y > clamp_eps && y < T{1} - clamp_eps;
    dlogit(i, 0) = live ? (y - labels[i]) / static_cast<T>(n) : T{0};
  }

  g.wo = matmul_tn(t.r, dlogit);
  g.bo = column_sums(dlogit);
  const Matrix<T> dr = matmul_nt(dlogit, p.wo);  // N x dr

  Matrix<T> dgate_pre(n, dims.dr);
  Matrix<T> dvalue(n, dims.dr);
  for (std::size_t i = 0; i < dr.size(); ++i) {
    const T gate = t.gate.flat()[i];
    dgate_pre.flat()[i] = dr.flat()[i] * t.value.flat()[i] * gate * (T{1} - gate);
    dvalue.flat()[i] = dr.flat()[i] * gate;
  }

  g.wr1 = matmul_tn(t.concat, dgate_pre);
  g.br1 = column_sums(dgate_pre);
  g.wr2 = matmul_tn(t.h2, dvalue);
  g.br2 = column_sums(dvalue);

  // Only the H2 part of the readout concat carries parameters upstream.
  Matrix<T> dh2 = column_block(matmul_nt(dgate_pre, p.wr1), 0, heads * dims.d2);
  dh2 += matmul_nt(dvalue, p.wr2);

  // Shared-weight GCN layer: per-head gradients sum into one projection grad.
  auto layer_back = [&](const Matrix<T>& dout, const Matrix<T>& out_act,
                        std::size_t q) {
    Matrix<T> dproj(n, q);
    for (std::size_t h = 0; h < heads; ++h) {
      Matrix<T> dpre = column_block(dout, h * q, q);
      const Matrix<T> act = column_block(out_act, h * q, q);
      for (std::size_t i = 0; i < dpre.size(); ++i)
        if (!(act.flat()[i] > T{0})) dpre.flat()[i] = T{0};
      dproj += matmul_tn(adjs[h], dpre);
    }
    return dproj;
  };

  const Matrix<T> dproj2 = layer_back(dh2, t.h2, dims.d2);
  g.w2 = matmul_tn(t.h1, dproj2);
  g.b2 = column_sums(dproj2);
  const Matrix<T> dh1 = matmul_nt(dproj2, p.w2);

  const Matrix<T> dproj1 = layer_back(dh1, t.h1, dims.d1);
  g.w1 = matmul_tn(x, dproj1);
  g.b1 = column_sums(dproj1);
  return out;
}

struct AdamHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamHyper from(const TrainConfig& c) {
    return {c.learning_rate, c.beta1, c.beta2, c.epsilon};
  }
};

template <typename T>
struct AdamState {
  GcnParams<T> m;
  GcnParams<T> v;
  std::uint64_t t = 0;

  static AdamState zeros(const GcnDims& dims) {
    return {GcnParams<T>::zeros(dims), GcnParams<T>::zeros(dims), 0};
  }
};

namespace detail {

template <typename T, typename Fn>
void zip_tensors(GcnParams<T>& a, const GcnParams<T>& b, GcnParams<T>& c,
                 GcnParams<T>& d, Fn&& fn) {
  std::vector<Matrix<T>*> as, cs, ds;
  std::vector<const Matrix<T>*> bs;
  a.for_each([&](Matrix<T>& m) { as.push_back(&m); });
  b.for_each([&](const Matrix<T>& m) { bs.push_back(&m); });
  c.for_each([&](Matrix<T>& m) { cs.push_back(&m); });
  d.for_each([&](Matrix<T>& m) { ds.push_back(&m); });
  for (std::size_t k = 0; k < as.size(); ++k) {
    require(as[k]->size() == bs[k]->size() && as[k]->size() == cs[k]->size() &&
                as[k]->size() == ds[k]->size(),
            ErrorKind::kContract, "parameter/gradient/moment shapes differ");
    fn(as[k]->flat(), bs[k]->flat(), cs[k]->flat(), ds[k]->flat());
  }
}

}  // namespace detail

/// Bias-corrected Adam, in place. An all-zero gradient decays the moments and
/// advances t but leaves the parameters untouched.
template <typename T>
void adam_step(GcnParams<T>& params, const GcnParams<T>& grads,
               AdamState<T>& state, const AdamHyper& hp) {
  bool all_zero = true;
  grads.for_each([&](const Matrix<T>& m) {
    for (T v : m.flat())
      if (v != T{0}) all_zero = false;
  });
  ++state.t;
  const T b1 = static_cast<T>(hp.beta1);
  const T b2 = static_cast<T>(hp.beta2);
  const T c1 = T{1} - std::pow(b1, static_cast<T>(state.t));
  const T c2 = T{1} - std::pow(b2, static_cast<T>(state.t));
  const T lr = static_cast<T>(hp.learning_rate);
  const T eps = static_cast<T>(hp.epsilon);
  detail::zip_tensors(params, grads, state.m, state.v,
                      [&](std::span<T> p, std::span<const T> g, std::span<T> m,
                          std::span<T> v) {
                        for (std::size_t i = 0; i < p.size(); ++i) {
                          m[i] = b1 * m[i] + (T{1} - b1) * g[i];
                          v[i] = b2 * v[i] + (T{1} - b2) * g[i] * g[i];
                          if (all_zero) continue;
                          const T mhat = m[i] / c1;
                          const T vhat = v[i] / c2;
                          p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
                        }
                      });
}

/// Glorot-uniform weights, zero biases. Draw order is the GcnParams field
/// order, row-major, so a seed pins the exact initial model.
template <typename T>
GcnParams<T> init_params(const GcnDims& dims, Rng& rng) {
  auto p = GcnParams<T>::zeros(dims);
  auto glorot = [&](Matrix<T>& w) {
    const double limit =
        std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (auto& v : w.flat()) v = static_cast<T>(rng.uniform(-limit, limit));
  };
  glorot(p.w1);
  glorot(p.w2);
  glorot(p.wr1);
  glorot(p.wr2);
  glorot(p.wo);
  return p;
}

// ---- training loop ----

/// One document prepared for training: cached graph, widened features, labels.
struct TrainingExample {
  std::string doc_id;
  std::vector<Matrix<double>> adjs;
  Matrix<double> x;
  std::vector<double> labels;
};

inline TrainingExample prepare_example(const DocumentBundle& b,
                                       const ThresholdPolicy& policy) {
  if (!b.labels) fail(ErrorKind::kData, "bundle '" + b.doc_id + "' has no labels");
  TrainingExample ex;
  ex.doc_id = b.doc_id;
  ex.adjs = build_graphs<double>(b, policy).normalized_adjacency;
  ex.x = b.embeddings.cast<double>();
  ex.labels.assign(b.labels->begin(), b.labels->end());
  return ex;
}

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0;
  std::optional<double> val_loss;
};

struct TrainResult {
  GcnParams<double> params;  // best by validation (or training) loss
  std::vector<EpochStats> history;
  std::size_t best_epoch = 0;
};

inline double mean_loss(const std::vector<TrainingExample>& examples,
                        std::span<const std::size_t> which,
                        const GcnParams<double>& params, double clamp_eps) {
  double sum = 0;
  for (auto i : which) {
    const auto& ex = examples[i];
    const auto y = forward<double>(ex.adjs, ex.x, params);
    sum += bce_loss<double>(y, ex.labels, clamp_eps);
  }
  return sum / static_cast<double>(which.size());
}

/// One Adam step per document, documents visited in a seeded shuffle each
/// epoch. Deterministic for a fixed config and corpus order.
inline TrainResult train(const std::vector<TrainingExample>& examples,
                         const TrainConfig& cfg) {
  cfg.validate();
  if (examples.empty()) fail(ErrorKind::kData, "empty training corpus");
  for (const auto& ex : examples) {
    if (ex.x.cols() != cfg.dims.d || ex.adjs.size() != cfg.dims.heads)
      fail(ErrorKind::kData,
           "bundle '" + ex.doc_id + "' has d=" + std::to_string(ex.x.cols()) +
               ", H=" + std::to_string(ex.adjs.size()) +
               ", config expects d=" + std::to_string(cfg.dims.d) +
               ", H=" + std::to_string(cfg.dims.heads));
  }

  Rng rng(cfg.seed);
  auto params = init_params<double>(cfg.dims, rng);

  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::size_t n_val = 0;
  if (cfg.validation_fraction > 0 && examples.size() > 1) {
    n_val = static_cast<std::size_t>(
        std::lround(cfg.validation_fraction * static_cast<double>(examples.size())));
    n_val = std::clamp<std::size_t>(n_val, 1, examples.size() - 1);
  }
  const std::vector<std::size_t> val(order.begin(), order.begin() + n_val);
  std::vector<std::size_t> train_idx(order.begin() + n_val, order.end());

  auto state = AdamState<double>::zeros(cfg.dims);
  const auto hp = AdamHyper::from(cfg);

  TrainResult result;
  result.params = params;
  double best = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(train_idx);
    double sum = 0;
    for (auto i : train_idx) {
      const auto& ex = examples[i];
      auto lg = backward<double>(ex.adjs, ex.x, ex.labels, params, cfg.clamp_eps);
      sum += lg.loss;
      adam_step(params, lg.grad, state, hp);
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = sum / static_cast<double>(train_idx.size());
    if (n_val > 0) stats.val_loss = mean_loss(examples, val, params, cfg.clamp_eps);
    result.history.push_back(stats);

    const double monitored = stats.val_loss.value_or(stats.train_loss);
    if (monitored < best) {
      best = monitored;
      result.params = params;
      result.best_epoch = epoch;
      stale = 0;
    } else {
      ++stale;
    }
    if (cfg.target_loss > 0 && stats.train_loss < cfg.target_loss) break;
    if (cfg.patience > 0 && stale >= cfg.patience) break;
  }
  return result;
}

inline std::vector<TrainingExample> prepare_examples(
    const std::vector<DocumentBundle>& corpus, const ThresholdPolicy& policy,
    std::size_t jobs) {
  std::vector<TrainingExample> out(corpus.size());
  parallel_for(corpus.size(), jobs,
               [&](std::size_t i) { out[i] = prepare_example(corpus[i], policy); });
  return out;
}

/// `epoch,train_loss,val_loss` with an empty val_loss when there is no split.
inline std::string history_csv(const std::vector<EpochStats>& history) {
  std::string out = "epoch,train_loss,val_loss\n";
  char buf[128];
  for (const auto& s : history) {
    if (s.val_loss)
      std::snprintf(buf, sizeof buf, "%zu,%.9f,%.9f\n", s.epoch, s.train_loss,
                    *s.val_loss);
    else
      std::snprintf(buf, sizeof buf, "%zu,%.9f,\n", s.epoch, s.train_loss);
    out += buf;
  }
  return out;
}

/// Loads a labelled corpus, trains, and writes the model (and optionally the
/// history CSV). Nothing is written if training fails.
inline TrainResult train_corpus(const std::filesystem::path& corpus_dir,
                                const TrainConfig& cfg,
                                const std::filesystem::path& model_out,
                                const std::filesystem::path& history_out = {},
                                std::size_t jobs = 1) {
  const auto corpus = load_corpus(corpus_dir);
  if (corpus.empty())
    fail(ErrorKind::kData, "no bundles in " + corpus_dir.string());
  auto result = train(prepare_examples(corpus, cfg.threshold, jobs), cfg);
  save_model(result.params, model_out);
  if (!history_out.empty()) {
    std::ofstream out(history_out, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::kIo, "cannot open " + history_out.string());
    out << history_csv(result.history);
  }
  return result;
}

// ---- gradient checking ----

struct GradCheckInstance {
  std::vector<Matrix<double>> adjs;
  Matrix<double> x;
  std::vector<double> labels;
  GcnParams<double> params;
};

/// Random instance with N in [2, 6], small random biases, and at least one
/// positive and one negative label.
inline GradCheckInstance random_instance(const GcnDims& dims,
                                         std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = 2 + rng.below(5);
  GradCheckInstance inst;
  inst.x = Matrix<double>(n, dims.d);
  for (auto& v : inst.x.flat()) v = rng.uniform(-1, 1);
  std::vector<Matrix<double>> raw;
  for (std::size_t h = 0; h < dims.heads; ++h) {
    Matrix<double> a(n, n);
    for (auto& v : a.flat()) v = rng.uniform();
    raw.push_back(std::move(a));
  }
  inst.adjs = build_graphs<double>(raw, ThresholdPolicy::uniform())
                  .normalized_adjacency;
  inst.labels.resize(n);
  for (auto& l : inst.labels) l = static_cast<double>(rng.below(2));
  inst.labels[0] = 1;
  inst.labels[1] = 0;
  inst.params = init_params<double>(dims, rng);
  for (auto* b : {&inst.params.b1, &inst.params.b2, &inst.params.br1,
                  &inst.params.br2, &inst.params.bo})
    for (auto& v : b->flat()) v = rng.uniform(-0.1, 0.1);
  return inst;
}

using GradientFn = std::function<GcnParams<double>(
    std::span<const Matrix<double>>, const Matrix<double>&,
    std::span<const double>, const GcnParams<double>&)>;

inline GcnParams<double> analytic_gradient(std::span<const Matrix<double>> adjs,
                                           const Matrix<double>& x,
                                           std::span<const double> labels,
                                           const GcnParams<double>& p) {
  return backward<double>(adjs, x, labels, p).grad;
}

/// |a - f| / max(|a|, |f|, 1e-4): relative for ordinary gradients, absolute
/// (scaled by 1e4) for gradients near zero.
inline double gradient_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-4});
  return std::abs(analytic - numeric) / denom;
}

/// Worst error of `grad_fn` against central differences over every parameter
/// of a random instance.
inline double grad_check(const GcnParams<double>& params,
                         const GradCheckInstance& inst,
                         const GradientFn& grad_fn = analytic_gradient,
                         double step = 1e-5) {
  const auto analytic = grad_fn(inst.adjs, inst.x, inst.labels, params);
  auto probe = params;
  auto loss = [&] {
    const auto y = forward<double>(inst.adjs, inst.x, probe);
    return bce_loss<double>(y, inst.labels);
  };
  std::vector<Matrix<double>*> ptensors;
  std::vector<const Matrix<double>*> gtensors;
  probe.for_each([&](Matrix<double>& m) { ptensors.push_back(&m); });
  analytic.for_each([&](const Matrix<double>& m) { gtensors.push_back(&m); });
  double worst = 0;
  for (std::size_t k = 0; k < ptensors.size(); ++k) {
    auto flat = ptensors[k]->flat();
    require(gtensors[k]->size() == flat.size(), ErrorKind::kContract,
            "gradient shape mismatch");
    for (std::size_t i = 0; i < flat.size(); ++i) {
      const double saved = flat[i];
      flat[i] = saved + step;
      const double up = loss();
      flat[i] = saved - step;
      const double down = loss();
      flat[i] = saved;
      const double numeric = (up - down) / (2 * step);
      worst = std::max(worst, gradient_error(gtensors[k]->flat()[i], numeric));
    }
  }
  return worst;
}

inline GcnDims grad_check_dims() {
  GcnDims g;
  g.d = 8;
  g.heads = 2;
  g.d1 = 6;
  g.d2 = 5;
  g.dr = 4;
  return g;
}

inline double grad_check(const GcnDims& dims, std::uint64_t seed,
                         const GradientFn& grad_fn = analytic_gradient) {
  const auto inst = random_instance(dims, seed);
  return grad_check(inst.params, inst, grad_fn);
}

}  // namespace attnsum

#endif  // ATTNSUM_TRAINING_HPP_
