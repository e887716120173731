// Copyright 2026 The attnsum Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef ATTNSUM_RANDOM_HPP_
#define ATTNSUM_RANDOM_HPP_

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace attnsum {

/// Seeded generator with a pinned output sequence. The std distributions are
/// implementation-defined, so uniform draws and shuffles are done by hand on
/// top of mt19937_64, which the standard does pin.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // [0, 1)
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::size_t below(std::size_t n) {
    return static_cast<std::size_t>(engine_() % n);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace attnsum

#endif  // ATTNSUM_RANDOM_HPP_
