// Copyright 2026 The attnsum Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef ATTNSUM_ROUGE_HPP_
#define ATTNSUM_ROUGE_HPP_

#include <algorithm>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace attnsum {

struct RougeScore {
  double precision = 0;
  double recall = 0;
  double f1 = 0;

  static RougeScore from_counts(std::size_t overlap, std::size_t candidate,
                                std::size_t reference) {
    RougeScore s;
    if (candidate == 0 || reference == 0) return s;
    s.precision = static_cast<double>(overlap) / static_cast<double>(candidate);
    s.recall = static_cast<double>(overlap) / static_cast<double>(reference);
    if (s.precision + s.recall > 0)
      s.f1 = 2 * s.precision * s.recall / (s.precision + s.recall);
    return s;
  }

  bool operator==(const RougeScore&) const = default;
};

using Tokens = std::vector<std::string>;

/// Lowercased maximal runs of [A-Za-z0-9] and non-ASCII bytes.
inline Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    const bool word = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                      (c >= '0' && c <= '9') || c >= 0x80;
    if (word) {
      cur.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

namespace detail {

inline std::map<std::string, std::size_t> ngram_counts(std::span<const std::string> toks,
                                                       std::size_t n) {
  std::map<std::string, std::size_t> counts;
  if (toks.size() < n) return counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    // Tokens never contain spaces, so a space-joined key is unambiguous.
    std::string key = toks[i];
    for (std::size_t k = 1; k < n; ++k) {
      key.push_back(' ');
      key += toks[i + k];
    }
    ++counts[key];
  }
  return counts;
}

}  // namespace detail

/// Clipped n-gram overlap.
inline RougeScore rouge_n(std::span<const std::string> candidate,
                          std::span<const std::string> reference,
                          std::size_t n) {
  if (n == 0 || candidate.size() < n || reference.size() < n) return {};
  const auto cand = detail::ngram_counts(candidate, n);
  const auto ref = detail::ngram_counts(reference, n);
  std::size_t overlap = 0;
  for (const auto& [gram, count] : cand) {
    auto it = ref.find(gram);
    if (it != ref.end()) overlap += std::min(count, it->second);
  }
  return RougeScore::from_counts(overlap, candidate.size() - n + 1,
                                 reference.size() - n + 1);
}

inline std::size_t lcs_length(std::span<const std::string> a,
                              std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

/// Sequence-level LCS over the whole candidate and reference.
inline RougeScore rouge_l(std::span<const std::string> candidate,
                          std::span<const std::string> reference) {
  if (candidate.empty() || reference.empty()) return {};
  return RougeScore::from_counts(lcs_length(candidate, reference),
                                 candidate.size(), reference.size());
}

struct RougeTriple {
  RougeScore r1, r2, rl;
};

inline RougeTriple rouge_all(std::span<const std::string> candidate,
                             std::span<const std::string> reference) {
  return {rouge_n(candidate, reference, 1), rouge_n(candidate, reference, 2),
          rouge_l(candidate, reference)};
}

}  // namespace attnsum

#endif  // ATTNSUM_ROUGE_HPP_
