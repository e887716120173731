// Copyright 2026 The attnsum Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef ATTNSUM_BUNDLE_IO_HPP_
#define ATTNSUM_BUNDLE_IO_HPP_

// ATSB document bundles.
//
// Layout (u32 = little-endian unsigned 32-bit, f32 = little-endian IEEE-754,
// row-major):
//
//   "ATSB" | u32 version=1 | u32 N | u32 d | u32 H | u32 id_len | id bytes
//   f32 embeddings[N*d] | f32 attention[H*N*N]
//   u32 labels_flag | (labels_flag == 1) u8 labels[N]
//   u32 ref_flag    | (ref_flag == 1) u32 ref_len, ref bytes
//   N x (u32 len, sentence bytes)
//
// A corpus is a directory of `<doc_id>.atsb` files, optionally with a
// `manifest.txt` listing doc_ids (one per line) that fixes the order.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <iterator>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "attnsum/errors.hpp"
#include "attnsum/matrix.hpp"

namespace attnsum {

inline constexpr std::array<char, 4> kBundleMagic = {'A', 'T', 'S', 'B'};
inline constexpr std::uint32_t kBundleVersion = 1;
inline constexpr std::string_view kBundleExtension = ".atsb";
inline constexpr std::string_view kManifestName = "manifest.txt";

struct DocumentBundle {
  std::string doc_id;
  std::vector<std::string> sentences;
  Matrix<float> embeddings;                 // N x d
  std::vector<Matrix<float>> raw_attention;  // H matrices of N x N
  std::optional<std::vector<std::uint8_t>> labels;
  std::optional<std::string> reference;

  std::size_t size() const noexcept { return sentences.size(); }
  std::size_t dim() const noexcept { return embeddings.cols(); }
  std::size_t heads() const noexcept { return raw_attention.size(); }

  bool operator==(const DocumentBundle&) const = default;
};

/// Throws a validation error naming the first offending field.
inline void validate_bundle(const DocumentBundle& b) {
  auto bad = [](const std::string& field, const std::string& why) {
    fail(ErrorKind::kValidation, field + ": " + why);
  };
  if (b.doc_id.empty()) bad("doc_id", "empty");
  if (b.doc_id.find_first_of("/\\\n") != std::string::npos)
    bad("doc_id", "contains a path separator or newline");
  const std::size_t n = b.size();
  if (n == 0) bad("sentences", "at least one sentence required");
  if (b.embeddings.rows() != n)
    bad("embeddings", "row count " + std::to_string(b.embeddings.rows()) +
                          " != sentence count " + std::to_string(n));
  if (b.dim() == 0) bad("embeddings", "zero width");
  for (float v : b.embeddings.flat())
    if (!std::isfinite(v)) bad("embeddings", "non-finite value");
  if (b.heads() == 0) bad("raw_attention", "at least one head required");
  for (std::size_t h = 0; h < b.heads(); ++h) {
    const auto& a = b.raw_attention[h];
    if (a.rows() != n || a.cols() != n)
      bad("raw_attention", "head " + std::to_string(h) + " is not N x N");
    for (float v : a.flat())
      if (!(v >= 0.0f && v <= 1.0f))
        bad("raw_attention",
            "head " + std::to_string(h) + " has entry outside [0, 1]");
  }
  if (b.labels) {
    if (b.labels->size() != n) bad("labels", "length != sentence count");
    for (auto v : *b.labels)
      if (v > 1) bad("labels", "value outside {0, 1}");
  }
}

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_f32(std::string& out, float v) {
  put_u32(out, std::bit_cast<std::uint32_t>(v));
}

inline void put_bytes(std::string& out, std::string_view s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

inline std::uint32_t checked_u32(std::size_t v, const char* field) {
  require(v <= 0xFFFFFFFFu, ErrorKind::kValidation,
          std::string(field) + ": too large for the file format");
  return static_cast<std::uint32_t>(v);
}

/// Bounds-checked little-endian cursor over an in-memory byte buffer.
class ByteReader {
 public:
  explicit ByteReader(std::string_view buf) : buf_(buf) {}

  std::size_t remaining() const noexcept { return buf_.size() - pos_; }

  void need(std::uint64_t bytes, const char* what) const {
    if (bytes > remaining())
      fail(ErrorKind::kTruncation,
           std::string(what) + " needs " + std::to_string(bytes) +
               " bytes, " + std::to_string(remaining()) + " left");
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_ + i]))
           << (8 * i);
    pos_ += 4;
    return v;
  }

  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

  std::string_view bytes(std::uint64_t n, const char* what) {
    need(n, what);
    auto s = buf_.substr(pos_, static_cast<std::size_t>(n));
    pos_ += static_cast<std::size_t>(n);
    return s;
  }

  std::uint32_t flag(const char* what) {
    std::uint32_t v = u32(what);
    if (v > 1)
      fail(ErrorKind::kFormat,
           std::string(what) + " must be 0 or 1, got " + std::to_string(v));
    return v;
  }

 private:
  std::string_view buf_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Serializes to the exact ATSB byte sequence.
inline std::string encode_bundle(const DocumentBundle& b) {
  validate_bundle(b);
  const std::size_t n = b.size();
  std::string out;
  out.append(kBundleMagic.data(), kBundleMagic.size());
  detail::put_u32(out, kBundleVersion);
  detail::put_u32(out, detail::checked_u32(n, "sentences"));
  detail::put_u32(out, detail::checked_u32(b.dim(), "embeddings"));
  detail::put_u32(out, detail::checked_u32(b.heads(), "raw_attention"));
  detail::put_bytes(out, b.doc_id);
  for (float v : b.embeddings.flat()) detail::put_f32(out, v);
  for (const auto& a : b.raw_attention)
    for (float v : a.flat()) detail::put_f32(out, v);
  detail::put_u32(out, b.labels ? 1 : 0);
  if (b.labels)
    for (auto v : *b.labels) out.push_back(static_cast<char>(v));
  detail::put_u32(out, b.reference ? 1 : 0);
  if (b.reference) detail::put_bytes(out, *b.reference);
  for (const auto& s : b.sentences) detail::put_bytes(out, s);
  return out;
}

inline std::size_t write_bundle(const DocumentBundle& b, std::ostream& sink) {
  const std::string bytes = encode_bundle(b);
  sink.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!sink) fail(ErrorKind::kIo, "bundle write failed");
  return bytes.size();
}

inline DocumentBundle decode_bundle(std::string_view buf) {
  detail::ByteReader in(buf);
  auto magic = in.bytes(4, "magic");
  if (!std::equal(magic.begin(), magic.end(), kBundleMagic.begin()))
    fail(ErrorKind::kFormat, "bad magic");
  const auto version = in.u32("version");
  if (version != kBundleVersion)
    fail(ErrorKind::kFormat, "unsupported version " + std::to_string(version));
  const std::uint64_t n = in.u32("N");
  const std::uint64_t d = in.u32("d");
  const std::uint64_t h = in.u32("H");
  if (n == 0 || d == 0 || h == 0)
    fail(ErrorKind::kFormat, "N, d and H must be positive");
  const auto id_len = in.u32("id_len");

  DocumentBundle b;
  b.doc_id = std::string(in.bytes(id_len, "doc_id"));

  // Check the tensor payload size up front so a corrupt header cannot trigger
  // a huge allocation.
  const std::uint64_t room = in.remaining() / 4;
  if (n > room || d > room || h > room || n * d > room ||
      h > room / (n * n) || n * d + h * n * n > room)
    fail(ErrorKind::kTruncation, "declared tensor sizes exceed stream length");
  std::vector<float> emb(n * d);
  for (auto& v : emb) v = in.f32("embeddings");
  for (float v : emb)
    if (!std::isfinite(v)) fail(ErrorKind::kData, "non-finite embedding");
  b.embeddings = Matrix<float>(n, d, std::move(emb));

  b.raw_attention.reserve(h);
  for (std::uint64_t k = 0; k < h; ++k) {
    std::vector<float> a(n * n);
    for (auto& v : a) v = in.f32("attention");
    for (float v : a)
      if (!std::isfinite(v)) fail(ErrorKind::kData, "non-finite attention");
    b.raw_attention.emplace_back(n, n, std::move(a));
  }

  if (in.flag("labels_flag")) {
    auto raw = in.bytes(n, "labels");
    std::vector<std::uint8_t> labels(raw.begin(), raw.end());
    for (auto v : labels)
      if (v > 1) fail(ErrorKind::kData, "label outside {0, 1}");
    b.labels = std::move(labels);
  }
  if (in.flag("ref_flag")) {
    const auto len = in.u32("ref_len");
    b.reference = std::string(in.bytes(len, "reference"));
  }
  b.sentences.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto len = in.u32("sentence length");
    b.sentences.emplace_back(in.bytes(len, "sentence"));
  }
  if (in.remaining() != 0)
    fail(ErrorKind::kFormat,
         std::to_string(in.remaining()) + " trailing bytes after bundle");

  try {
    validate_bundle(b);
  } catch (const Error& e) {
    fail(ErrorKind::kData, e.message());
  }
  return b;
}

inline DocumentBundle read_bundle(std::istream& source) {
  std::string buf((std::istreambuf_iterator<char>(source)),
                  std::istreambuf_iterator<char>());
  if (source.bad()) fail(ErrorKind::kIo, "bundle read failed");
  return decode_bundle(buf);
}

inline DocumentBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  try {
    return read_bundle(in);
  } catch (const Error& e) {
    fail(e.kind(), path.string() + ": " + e.message());
  }
}

/// Writes via a temporary file and rename so readers never see a partial
/// bundle.
inline std::size_t save_bundle(const DocumentBundle& b,
                               const std::filesystem::path& path) {
  const std::string bytes = encode_bundle(b);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::kIo, "cannot open " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::kIo, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorKind::kIo, "rename to " + path.string() + ": " + ec.message());
  return bytes.size();
}

inline std::filesystem::path bundle_path(const std::filesystem::path& dir,
                                         const std::string& doc_id) {
  return dir / (doc_id + std::string(kBundleExtension));
}

// ---- corpus directories ----

inline std::vector<std::filesystem::path> list_bundle_files(
    const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  if (!std::filesystem::is_directory(dir))
    fail(ErrorKind::kIo, dir.string() + " is not a directory");
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() &&
        entry.path().extension() == kBundleExtension)
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

inline std::vector<std::string> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open manifest " + path.string());
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) ids.push_back(line);
  }
  return ids;
}

inline void write_manifest(const std::filesystem::path& path,
                           const std::vector<std::string>& ids) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot open manifest " + path.string());
  for (const auto& id : ids) out << id << '\n';
  if (!out) fail(ErrorKind::kIo, "manifest write failed");
}

/// Bundle paths of a corpus in canonical order. `source` may be a corpus
/// directory (its manifest.txt is honoured when present) or a manifest file,
/// whose bundles live next to it.
inline std::vector<std::filesystem::path> corpus_files(
    const std::filesystem::path& source) {
  namespace fs = std::filesystem;
  fs::path manifest;
  fs::path dir = source;
  if (fs::is_regular_file(source)) {
    manifest = source;
    dir = source.parent_path();
  } else if (fs::is_regular_file(source / kManifestName)) {
    manifest = source / kManifestName;
  }
  if (manifest.empty()) return list_bundle_files(dir);
  std::vector<fs::path> files;
  for (const auto& id : read_manifest(manifest)) files.push_back(bundle_path(dir, id));
  return files;
}

inline std::vector<DocumentBundle> load_corpus(
    const std::filesystem::path& source) {
  std::vector<DocumentBundle> out;
  for (const auto& f : corpus_files(source)) out.push_back(load_bundle(f));
  return out;
}

struct BundleDiagnostic {
  std::filesystem::path path;
  std::string reason;
};

struct CorpusReport {
  std::size_t bundle_count = 0;
  std::vector<BundleDiagnostic> diagnostics;
  std::map<std::size_t, std::size_t> sentence_histogram;  // N -> count
};

/// Read-only scan of every *.atsb file in `dir`. Manifest entries without a
/// bundle file are reported too.
inline CorpusReport validate_corpus(const std::filesystem::path& dir) {
  CorpusReport report;
  const auto files = list_bundle_files(dir);
  report.bundle_count = files.size();
  for (const auto& f : files) {
    try {
      auto b = load_bundle(f);
      ++report.sentence_histogram[b.size()];
      if (f.stem().string() != b.doc_id)
        report.diagnostics.push_back(
            {f, "doc_id '" + b.doc_id + "' does not match file name"});
    } catch (const Error& e) {
      report.diagnostics.push_back({f, e.what()});
    }
  }
  const auto manifest = dir / kManifestName;
  if (std::filesystem::is_regular_file(manifest)) {
    for (const auto& id : read_manifest(manifest)) {
      auto p = bundle_path(dir, id);
      if (!std::filesystem::exists(p))
        report.diagnostics.push_back({p, "listed in manifest but missing"});
    }
  }
  return report;
}

}  // namespace attnsum

#endif  // ATTNSUM_BUNDLE_IO_HPP_
