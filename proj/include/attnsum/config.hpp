// Copyright 2026 The attnsum Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef ATTNSUM_CONFIG_HPP_
#define ATTNSUM_CONFIG_HPP_

// Flat JSON training configuration. Keys:
//   d, heads, d1, d2, dr                  model dimensions
//   threshold                             "uniform" or a number in (0, 1)
//   learning_rate, beta1, beta2, epsilon  Adam
//   epochs, seed, validation_fraction, patience, clamp_eps, target_loss
// Unknown keys are rejected.

#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "attnsum/errors.hpp"
#include "attnsum/graph.hpp"
#include "attnsum/training.hpp"
#include "json.hpp"

namespace attnsum {

struct LoadedConfig {
  TrainConfig config;
  std::set<std::string> keys;  // keys present in the source document
};

inline LoadedConfig parse_config(const nlohmann::json& j,
                                 TrainConfig base = TrainConfig{}) {
  if (!j.is_object()) fail(ErrorKind::kConfig, "config must be a JSON object");
  LoadedConfig out{std::move(base), {}};
  auto& c = out.config;
  try {
    for (const auto& [key, value] : j.items()) {
      out.keys.insert(key);
      if (key == "d") c.dims.d = value.get<std::size_t>();
      else if (key == "heads") c.dims.heads = value.get<std::size_t>();
      else if (key == "d1") c.dims.d1 = value.get<std::size_t>();
      else if (key == "d2") c.dims.d2 = value.get<std::size_t>();
      else if (key == "dr") c.dims.dr = value.get<std::size_t>();
      else if (key == "threshold")
        c.threshold = value.is_string()
                          ? ThresholdPolicy::parse(value.get<std::string>())
                          : ThresholdPolicy::fixed(value.get<double>());
      else if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "beta1") c.beta1 = value.get<double>();
      else if (key == "beta2") c.beta2 = value.get<double>();
      else if (key == "epsilon") c.epsilon = value.get<double>();
      else if (key == "epochs") c.epochs = value.get<std::size_t>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "validation_fraction") c.validation_fraction = value.get<double>();
      else if (key == "patience") c.patience = value.get<std::size_t>();
      else if (key == "clamp_eps") c.clamp_eps = value.get<double>();
      else if (key == "target_loss") c.target_loss = value.get<double>();
      else fail(ErrorKind::kConfig, "unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfig, e.what());
  }
  c.validate();
  return out;
}

inline LoadedConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfig, path.string() + ": " + e.what());
  }
  return parse_config(j);
}

}  // namespace attnsum

#endif  // ATTNSUM_CONFIG_HPP_
