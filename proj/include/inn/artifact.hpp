// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <stdexcept>

#include <json.hpp>

#include "inn/flow.hpp"

namespace inn {

/// Malformed or incompatible model file.
class ArtifactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kArtifactVersion = 1;

/// A trained model plus the experiment configuration that produced it.
struct ModelArtifact {
  InnModel model;
  nlohmann::json config;  // experiment snapshot, may be null
};

/// Plain-text format, version 1:
///
///   inn-model 1
///   dims <D> <M> <K> <W>
///   model <one-line json: blocks, hidden, slope, clamp, seed>
///   config <one-line json>
///   layers <count>
///   block | perm <W column indices>          (one line per layer)
///   parameters <count>
///   param <name> <rows> <cols>
///   <rows*cols reals, row-major, 17 significant digits>
///   end
///
/// Loading rebuilds the network from `dims` and `model`, then overwrites
/// permutations and parameter values, so the round trip is bit-exact.
void save_model(const std::filesystem::path& path, const InnModel& model,
                const nlohmann::json& config = nullptr);
ModelArtifact load_model(const std::filesystem::path& path);

}  // namespace inn
