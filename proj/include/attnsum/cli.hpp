// Copyright 2026 The attnsum Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef ATTNSUM_CLI_HPP_
#define ATTNSUM_CLI_HPP_

// `attnsum` command line. Exit codes: 0 success, 1 usage or configuration
// error, 2 data, format or I/O error (and a failed gradcheck).

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "attnsum/bundle_io.hpp"
#include "attnsum/config.hpp"
#include "attnsum/errors.hpp"
#include "attnsum/eval.hpp"
#include "attnsum/gcn.hpp"
#include "attnsum/graph.hpp"
#include "attnsum/oracle.hpp"
#include "attnsum/parallel.hpp"
#include "attnsum/training.hpp"

namespace attnsum::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

inline constexpr std::size_t kDefaultMinSents = 5;
inline constexpr std::size_t kDefaultMaxSents = 50;

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot open " + path.string());
  out << text;
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

/// --seed, then ATTNSUM_SEED, then whatever the config says.
inline std::optional<std::uint64_t> resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return flag;
  if (const char* env = std::getenv("ATTNSUM_SEED"); env && *env) {
    char* end = nullptr;
    const auto v = std::strtoull(env, &end, 10);
    if (*end != '\0') fail(ErrorKind::kConfig, "ATTNSUM_SEED is not an integer");
    return v;
  }
  return std::nullopt;
}

template <typename Map>
std::string histogram_line(const Map& hist) {
  std::string out;
  for (const auto& [k, v] : hist) {
    if (!out.empty()) out += ' ';
    out += std::to_string(k) + ":" + std::to_string(v);
  }
  return out.empty() ? "(empty)" : out;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/// Parses argv and runs one subcommand.
inline int dispatch(int argc, const char* const* argv, std::ostream& out,
                    std::ostream& err) {
  CLI::App app{"Attention-graph extractive summarization"};
  app.name("attnsum");
  app.require_subcommand(1);

  std::size_t jobs = default_jobs();
  bool quiet = false;
  app.add_option("--jobs", jobs, "Worker threads for per-document stages")
      ->check(CLI::PositiveNumber);
  app.add_flag("--quiet", quiet, "Suppress timing lines");

  // validate
  std::string validate_dir;
  auto* validate = app.add_subcommand("validate", "Check every bundle in a corpus directory");
  validate->add_option("dir", validate_dir)->required();

  // label
  std::string label_dir, label_refs, label_k = "avg";
  auto* label = app.add_subcommand("label", "Write oracle labels into bundles");
  label->add_option("dir", label_dir)->required();
  label->add_option("--refs", label_refs, "References JSON lines")->required();
  label->add_option("--k", label_k, "avg | fixed:<n>");

  // train
  std::string train_dir, train_out, train_config, train_history;
  std::optional<std::uint64_t> train_seed;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a labelled corpus");
  train_cmd->add_option("dir", train_dir)->required();
  train_cmd->add_option("--out", train_out, "Model file (ATSM)")->required();
  train_cmd->add_option("--config", train_config, "JSON config");
  train_cmd->add_option("--seed", train_seed);
  train_cmd->add_option("--history", train_history,
                        "History CSV (default: <out>.history.csv)");

  // infer
  std::string infer_model, infer_bundle, infer_threshold = "uniform";
  std::size_t infer_k = 3;
  auto* infer = app.add_subcommand("infer", "Print the selected sentences of one bundle");
  infer->add_option("--model", infer_model)->required();
  infer->add_option("--bundle", infer_bundle)->required();
  infer->add_option("--k", infer_k)->check(CLI::PositiveNumber);
  infer->add_option("--threshold", infer_threshold, "uniform | value in (0,1)");

  // eval
  std::string eval_model, eval_dir, eval_refs, eval_csv, eval_threshold = "uniform";
  std::optional<std::size_t> eval_lead, eval_k, eval_min, eval_max;
  auto* eval = app.add_subcommand("eval", "Mean ROUGE F1 of a model or the Lead-N baseline");
  auto* model_opt = eval->add_option("--model", eval_model);
  auto* lead_opt = eval->add_option("--lead", eval_lead)->check(CLI::PositiveNumber);
  model_opt->excludes(lead_opt);
  eval->add_option("dir", eval_dir, "Corpus directory or manifest")->required();
  eval->add_option("--refs", eval_refs)->required();
  eval->add_option("--k", eval_k)->check(CLI::PositiveNumber);
  eval->add_option("--min-sents", eval_min);
  eval->add_option("--max-sents", eval_max);
  eval->add_option("--csv", eval_csv, "Per-document CSV output");
  eval->add_option("--threshold", eval_threshold, "uniform | value in (0,1)");

  // filter
  std::string filter_dir, filter_out;
  std::size_t filter_min = kDefaultMinSents, filter_max = kDefaultMaxSents;
  auto* filter = app.add_subcommand("filter", "List doc_ids within sentence-count bounds");
  filter->add_option("dir", filter_dir)->required();
  filter->add_option("--min-sents", filter_min);
  filter->add_option("--max-sents", filter_max);
  filter->add_option("--out", filter_out, "Manifest file to write");

  // inspect
  std::string inspect_bundle, inspect_threshold = "uniform", inspect_dot;
  std::size_t inspect_head = 0;
  auto* inspect = app.add_subcommand("inspect", "Graph statistics for one bundle");
  inspect->add_option("bundle", inspect_bundle)->required();
  inspect->add_option("--head", inspect_head);
  inspect->add_option("--threshold", inspect_threshold, "uniform | value in (0,1)");
  inspect->add_option("--dot", inspect_dot, "Write the head's graph as DOT");

  // count-params
  std::string count_config;
  auto* count = app.add_subcommand("count-params", "Number of trainable parameters");
  count->add_option("--config", count_config);

  // gradcheck
  std::optional<std::uint64_t> gc_seed;
  auto* gradcheck = app.add_subcommand("gradcheck", "Backward pass vs central differences");
  gradcheck->add_option("--seed", gc_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*validate) {
      const auto report = validate_corpus(validate_dir);
      out << "bundles: " << report.bundle_count << "\n";
      out << "sentence histogram (N:count): "
          << detail::histogram_line(report.sentence_histogram) << "\n";
      out << "diagnostics: " << report.diagnostics.size() << "\n";
      for (const auto& d : report.diagnostics)
        out << "  " << d.path.string() << ": " << d.reason << "\n";
      return report.diagnostics.empty() ? kExitOk : kExitData;
    }

    if (*label) {
      const auto report = label_corpus(label_dir, read_references(label_refs),
                                       KPolicy::parse(label_k), jobs);
      out << "labelled " << report.documents << " documents with k = " << report.k << "\n";
      out << "positive-label histogram (labels:docs): "
          << detail::histogram_line(report.positives_histogram) << "\n";
      return kExitOk;
    }

    if (*train_cmd) {
      const auto t0 = std::chrono::steady_clock::now();
      LoadedConfig loaded;
      if (!train_config.empty()) loaded = load_config(train_config);
      auto& cfg = loaded.config;
      if (auto seed = detail::resolve_seed(train_seed)) cfg.seed = *seed;
      const auto corpus = load_corpus(train_dir);
      if (corpus.empty()) fail(ErrorKind::kData, "no bundles in " + train_dir);
      // Encoder width and head count follow the corpus unless pinned.
      if (!loaded.keys.contains("d")) cfg.dims.d = corpus.front().dim();
      if (!loaded.keys.contains("heads")) cfg.dims.heads = corpus.front().heads();
      auto result = train(prepare_examples(corpus, cfg.threshold, jobs), cfg);
      save_model(result.params, train_out);
      const std::string history =
          train_history.empty() ? train_out + ".history.csv" : train_history;
      detail::write_text(history, history_csv(result.history));
      const auto& last = result.history.back();
      out << "epochs: " << result.history.size() << ", best epoch: " << result.best_epoch
          << ", final train loss: " << last.train_loss << "\n";
      out << "model: " << train_out << "\nhistory: " << history << "\n";
      if (!quiet) out << "elapsed: " << detail::seconds_since(t0) << " s\n";
      return kExitOk;
    }

    if (*infer) {
      const auto params = load_model<double>(infer_model);
      const auto bundle = load_bundle(infer_bundle);
      const auto select = model_selector(params, ThresholdPolicy::parse(infer_threshold), infer_k);
      for (auto i : select(bundle)) out << bundle.sentences[i] << "\n";
      return kExitOk;
    }

    if (*eval) {
      const auto t0 = std::chrono::steady_clock::now();
      if (eval_model.empty() && !eval_lead)
        fail(ErrorKind::kConfig, "eval needs --model or --lead");
      const auto policy = ThresholdPolicy::parse(eval_threshold);
      std::optional<GcnParams<double>> params;
      if (!eval_model.empty()) params = load_model<double>(eval_model);
      const auto refs = read_references(eval_refs);

      std::vector<DocumentBundle> bundles = load_corpus(eval_dir);
      if (eval_min || eval_max) {
        const std::size_t lo = eval_min.value_or(kDefaultMinSents);
        const std::size_t hi = eval_max.value_or(kDefaultMaxSents);
        require(lo <= hi, ErrorKind::kConfig, "min-sents exceeds max-sents");
        std::erase_if(bundles, [&](const DocumentBundle& b) {
          return b.size() < lo || b.size() > hi;
        });
      }
      std::vector<std::string> ids;
      for (const auto& b : bundles) ids.push_back(b.doc_id);
      const auto references = references_for(refs, ids);

      SentenceSelector select;
      std::size_t k = 0;
      if (eval_lead) {
        k = eval_k.value_or(*eval_lead);
        select = lead_selector(k);
      } else {
        k = eval_k.value_or(resolve_k(KPolicy::average(), references));
        select = model_selector(*params, policy, k);
      }
      const auto report = evaluate(bundles, refs, select, jobs);
      if (!eval_csv.empty()) detail::write_text(eval_csv, report.csv());
      out << (eval_lead ? "Lead-" + std::to_string(k) : "model " + eval_model + ", k = " + std::to_string(k))
          << "\n"
          << report.summary();
      if (!quiet) out << "elapsed: " << detail::seconds_since(t0) << " s\n";
      return kExitOk;
    }

    if (*filter) {
      const auto kept = filter_corpus(filter_dir, filter_min, filter_max);
      if (!filter_out.empty()) {
        write_manifest(filter_out, kept);
        out << "kept " << kept.size() << " documents -> " << filter_out << "\n";
      } else {
        for (const auto& id : kept) out << id << "\n";
      }
      return kExitOk;
    }

    if (*inspect) {
      const auto bundle = load_bundle(inspect_bundle);
      const auto graph = build_graphs<double>(bundle, ThresholdPolicy::parse(inspect_threshold));
      require(inspect_head < graph.heads(), ErrorKind::kConfig,
              "head " + std::to_string(inspect_head) + " out of range (H = " +
                  std::to_string(graph.heads()) + ")");
      out << "doc_id: " << bundle.doc_id << "\nN: " << bundle.size()
          << "\nd: " << bundle.dim() << "\nH: " << bundle.heads()
          << "\nthreshold: " << graph.threshold << "\n";
      out << "edges per head:";
      for (const auto& a : graph.binary_adjacency) out << ' ' << edge_count(a);
      out << "\nhead " << inspect_head << " degree histogram (degree:nodes): "
          << detail::histogram_line(degree_histogram(graph.binary_adjacency[inspect_head]))
          << "\n";
      if (!inspect_dot.empty())
        detail::write_text(inspect_dot, to_dot(graph.binary_adjacency[inspect_head],
                                               bundle.doc_id + "/head" +
                                                   std::to_string(inspect_head)));
      return kExitOk;
    }

    if (*count) {
      GcnDims dims;
      if (!count_config.empty()) dims = load_config(count_config).config.dims;
      out << count_params(dims) << "\n";
      return kExitOk;
    }

    if (*gradcheck) {
      const auto seed = detail::resolve_seed(gc_seed).value_or(0);
      const double e = grad_check(grad_check_dims(), seed);
      char buf[96];
      std::snprintf(buf, sizeof buf, "max relative error: %.3e\n", e);
      out << buf << (e < 1e-4 ? "PASS" : "FAIL") << "\n";
      return e < 1e-4 ? kExitOk : kExitData;
    }
  } catch (const Error& e) {
    err << "attnsum: " << e.what() << "\n";
    return e.kind() == ErrorKind::kConfig ? kExitUsage : kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "attnsum: I/O error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace attnsum::cli

#endif  // ATTNSUM_CLI_HPP_
