// Copyright 2026 The attnsum Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef ATTNSUM_EVAL_HPP_
#define ATTNSUM_EVAL_HPP_

#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "attnsum/bundle_io.hpp"
#include "attnsum/errors.hpp"
#include "attnsum/gcn.hpp"
#include "attnsum/graph.hpp"
#include "attnsum/oracle.hpp"
#include "attnsum/parallel.hpp"
#include "attnsum/rouge.hpp"

namespace attnsum {

/// min(k, N) highest-scoring indices in document order; ties to the smaller
/// index.
template <typename T>
std::vector<std::size_t> select_top_k(std::span<const T> scores, std::size_t k) {
  require(k >= 1, ErrorKind::kConfig, "k must be >= 1");
  return top_k_indices(scores, k);
}

inline std::vector<std::size_t> lead_k(std::size_t n, std::size_t k) {
  require(k >= 1, ErrorKind::kConfig, "k must be >= 1");
  std::vector<std::size_t> idx(std::min(n, k));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return idx;
}

/// doc_ids whose sentence count lies in [min_sents, max_sents], in corpus
/// order. Reads only; writing a manifest is up to the caller.
inline std::vector<std::string> filter_corpus(const std::filesystem::path& source,
                                              std::size_t min_sents,
                                              std::size_t max_sents) {
  require(min_sents <= max_sents, ErrorKind::kConfig,
          "min_sents must not exceed max_sents");
  std::vector<std::string> kept;
  for (const auto& f : corpus_files(source)) {
    const auto b = load_bundle(f);
    if (b.size() >= min_sents && b.size() <= max_sents) kept.push_back(b.doc_id);
  }
  return kept;
}

/// Joins the chosen sentences, in document order, with single spaces.
inline std::string candidate_text(const DocumentBundle& b,
                                  std::vector<std::size_t> indices) {
  std::sort(indices.begin(), indices.end());
  std::string out;
  for (auto i : indices) {
    if (!out.empty()) out.push_back(' ');
    out += b.sentences.at(i);
  }
  return out;
}

using SentenceSelector = std::function<std::vector<std::size_t>(const DocumentBundle&)>;

inline SentenceSelector lead_selector(std::size_t k) {
  require(k >= 1, ErrorKind::kConfig, "k must be >= 1");
  return [k](const DocumentBundle& b) { return lead_k(b.size(), k); };
}

inline SentenceSelector model_selector(GcnParams<double> params,
                                       ThresholdPolicy policy, std::size_t k) {
  require(k >= 1, ErrorKind::kConfig, "k must be >= 1");
  return [params = std::move(params), policy, k](const DocumentBundle& b) {
    const auto dims = params.dims();
    if (b.dim() != dims.d || b.heads() != dims.heads)
      fail(ErrorKind::kData, "bundle '" + b.doc_id + "' shape (d=" +
                                 std::to_string(b.dim()) + ", H=" +
                                 std::to_string(b.heads()) + ") does not match model");
    const auto graph = build_graphs<double>(b, policy);
    const auto y = forward(graph, b.embeddings.cast<double>(), params);
    return select_top_k<double>(y, k);
  };
}

struct DocScore {
  std::string doc_id;
  double r1 = 0, r2 = 0, rl = 0;  // F1
};

struct EvalReport {
  std::vector<DocScore> documents;
  double mean_r1 = 0, mean_r2 = 0, mean_rl = 0;  // F1 x 100

  /// `doc_id,r1,r2,rl`, F1 as fractions with 6 decimals.
  std::string csv() const {
    std::string out = "doc_id,r1,r2,rl\n";
    char buf[96];
    for (const auto& d : documents) {
      std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.6f\n", d.r1, d.r2, d.rl);
      out += d.doc_id;
      out += buf;
    }
    return out;
  }

  std::string summary() const {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "ROUGE-1/2/L F1 (×100) over %zu documents\n"
                  "ROUGE-1  %.2f\nROUGE-2  %.2f\nROUGE-L  %.2f\n",
                  documents.size(), mean_r1, mean_r2, mean_rl);
    return buf;
  }
};

/// Scores `select`'s picks against each document's reference. Every
/// reference is resolved before any scoring starts.
inline EvalReport evaluate(const std::vector<DocumentBundle>& bundles,
                           const ReferenceMap& refs,
                           const SentenceSelector& select, std::size_t jobs = 1) {
  std::vector<std::string> ids;
  for (const auto& b : bundles) ids.push_back(b.doc_id);
  const auto references = references_for(refs, ids);

  EvalReport report;
  report.documents.resize(bundles.size());
  parallel_for(bundles.size(), jobs, [&](std::size_t i) {
    const auto& b = bundles[i];
    const auto cand = tokenize(candidate_text(b, select(b)));
    const auto ref = tokenize(references[i]);
    const auto s = rouge_all(cand, ref);
    report.documents[i] = {b.doc_id, s.r1.f1, s.r2.f1, s.rl.f1};
  });
  if (!bundles.empty()) {
    double s1 = 0, s2 = 0, sl = 0;
    for (const auto& d : report.documents) {
      s1 += d.r1;
      s2 += d.r2;
      sl += d.rl;
    }
    const double n = static_cast<double>(bundles.size());
    report.mean_r1 = 100 * s1 / n;
    report.mean_r2 = 100 * s2 / n;
    report.mean_rl = 100 * sl / n;
  }
  return report;
}

}  // namespace attnsum

#endif  // ATTNSUM_EVAL_HPP_
