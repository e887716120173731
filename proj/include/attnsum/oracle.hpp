// Copyright 2026 The attnsum Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef ATTNSUM_ORACLE_HPP_
#define ATTNSUM_ORACLE_HPP_

// Extractive oracle labels: the k sentences with the highest individual
// ROUGE-2 F1 against the reference.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "attnsum/bundle_io.hpp"
#include "attnsum/errors.hpp"
#include "attnsum/parallel.hpp"
#include "attnsum/rouge.hpp"
#include "json.hpp"

namespace attnsum {

/// Indices of the min(k, N) largest scores; ties go to the smaller index.
/// Result is in document order.
template <typename T>
std::vector<std::size_t> top_k_indices(std::span<const T> scores, std::size_t k) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  const std::size_t take = std::min(k, idx.size());
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  idx.resize(take);
  std::sort(idx.begin(), idx.end());
  return idx;
}

inline std::vector<std::uint8_t> label_document(
    const std::vector<std::string>& sentences, const std::string& reference,
    std::size_t k) {
  if (sentences.empty()) fail(ErrorKind::kData, "document has no sentences");
  require(k >= 1, ErrorKind::kConfig, "k must be >= 1");
  const auto ref = tokenize(reference);
  std::vector<double> scores;
  scores.reserve(sentences.size());
  for (const auto& s : sentences) scores.push_back(rouge_n(tokenize(s), ref, 2).f1);
  std::vector<std::uint8_t> labels(sentences.size(), 0);
  for (auto i : top_k_indices<double>(scores, k)) labels[i] = 1;
  return labels;
}

/// "avg" (corpus-average reference sentence count, rounded, at least 1) or
/// "fixed:<n>".
class KPolicy {
 public:
  static KPolicy average() { return KPolicy(0); }
  static KPolicy fixed(std::size_t k) {
    require(k >= 1, ErrorKind::kConfig, "k must be >= 1");
    return KPolicy(k);
  }
  static KPolicy parse(const std::string& text) {
    if (text == "avg") return average();
    const std::string prefix = "fixed:";
    if (text.rfind(prefix, 0) == 0) {
      const auto digits = text.substr(prefix.size());
      if (!digits.empty() &&
          std::all_of(digits.begin(), digits.end(),
                      [](char c) { return c >= '0' && c <= '9'; }))
        return fixed(std::stoul(digits));
    }
    fail(ErrorKind::kConfig, "k policy must be 'avg' or 'fixed:<n>', got '" + text + "'");
  }

  bool is_average() const noexcept { return k_ == 0; }
  std::size_t fixed_k() const noexcept { return k_; }

 private:
  explicit KPolicy(std::size_t k) : k_(k) {}
  std::size_t k_;
};

inline std::size_t k_from_average(double avg) {
  return static_cast<std::size_t>(std::max<long>(1, std::lround(avg)));
}

/// Sentences in a reference summary: runs ended by '.', '!' or '?' followed
/// by whitespace or end of text, or by a newline. Empty pieces do not count.
inline std::size_t count_sentences(const std::string& text) {
  std::size_t count = 0;
  bool has_word = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    const bool terminal =
        c == '\n' ||
        ((c == '.' || c == '!' || c == '?') &&
         (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1]))));
    if (std::isalnum(static_cast<unsigned char>(c)) ||
        static_cast<unsigned char>(c) >= 0x80)
      has_word = true;
    if (terminal) {
      if (has_word) ++count;
      has_word = false;
    }
  }
  return count + (has_word ? 1 : 0);
}

inline std::size_t resolve_k(const KPolicy& policy,
                             const std::vector<std::string>& references) {
  if (!policy.is_average()) return policy.fixed_k();
  if (references.empty()) return 1;
  double total = 0;
  for (const auto& r : references) total += static_cast<double>(count_sentences(r));
  return k_from_average(total / static_cast<double>(references.size()));
}

using ReferenceMap = std::map<std::string, std::string>;

/// JSON lines with `doc_id` and `reference`. Blank lines are skipped.
inline ReferenceMap read_references(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open references " + path.string());
  ReferenceMap refs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      refs[j.at("doc_id").get<std::string>()] = j.at("reference").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::kData, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return refs;
}

/// References for `ids`, or a data error listing every missing doc_id.
inline std::vector<std::string> references_for(const ReferenceMap& refs,
                                               const std::vector<std::string>& ids) {
  std::vector<std::string> out, missing;
  for (const auto& id : ids) {
    auto it = refs.find(id);
    if (it == refs.end())
      missing.push_back(id);
    else
      out.push_back(it->second);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    fail(ErrorKind::kData, "no reference for: " + list);
  }
  return out;
}

struct LabelReport {
  std::size_t documents = 0;
  std::size_t k = 0;
  std::map<std::size_t, std::size_t> positives_histogram;  // #labels -> docs
};

/// Labels every bundle of a corpus and rewrites it in place with the labels
/// and its reference embedded. Re-running produces identical files.
inline LabelReport label_corpus(const std::filesystem::path& dir,
                                const ReferenceMap& refs, const KPolicy& policy,
                                std::size_t jobs = 1) {
  const auto files = corpus_files(dir);
  std::vector<DocumentBundle> bundles(files.size());
  parallel_for(files.size(), jobs, [&](std::size_t i) { bundles[i] = load_bundle(files[i]); });
  std::vector<std::string> ids;
  for (const auto& b : bundles) ids.push_back(b.doc_id);
  const auto references = references_for(refs, ids);
  for (std::size_t i = 0; i < references.size(); ++i)
    if (references[i].empty()) fail(ErrorKind::kData, "empty reference for " + ids[i]);

  LabelReport report;
  report.documents = bundles.size();
  report.k = resolve_k(policy, references);
  parallel_for(bundles.size(), jobs, [&](std::size_t i) {
    auto& b = bundles[i];
    b.labels = label_document(b.sentences, references[i], report.k);
    b.reference = references[i];
    save_bundle(b, files[i]);
  });
  for (const auto& b : bundles) {
    const auto& l = *b.labels;
    ++report.positives_histogram[static_cast<std::size_t>(std::count(l.begin(), l.end(), 1))];
  }
  return report;
}

}  // namespace attnsum

#endif  // ATTNSUM_ORACLE_HPP_
