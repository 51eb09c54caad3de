// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "inn/evaluation.hpp"
#include "inn/flow.hpp"
#include "inn/problems.hpp"
#include "inn/trainer.hpp"

namespace inn {

/// Invalid or inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ProblemConfig {
  std::string name = "gmm";  // gmm | kinematics | dataset
  int latent = 2;
  std::optional<int> width;  // defaults per problem
  GmmSpec gmm{};
  KinematicsSpec kinematics{};
  std::string dataset_path;  // dataset: CSV with x_* then y_* columns
  int dataset_x_dim = 0;
};

struct EvaluationConfig {
  int test_size = 100;
  int samples = 1024;
  int label_samples = 4096;
  int grid_points = 61;
  double grid_extent = 3.0;
  std::string posterior_source = "inn";  // inn | analytic | point_mass
  std::vector<double> latent_y_star;      // empty: problem default
};

/// Everything needed to reproduce a run. Sub-seeds for model initialisation,
/// training and evaluation are derived from `seed`.
struct ExperimentConfig {
  ProblemConfig problem;
  ModelConfig model;
  TrainConfig train;
  EvaluationConfig evaluation;
  std::string output_dir = "runs/experiment";
  std::uint64_t seed = 0;

  /// Rejects unknown keys and out-of-range values with ConfigError.
  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  /// Re-derives the sub-seeds after `seed` changed.
  void apply_seed(std::uint64_t new_seed);
  std::uint64_t evaluation_seed() const;
  /// The evaluation section with the derived evaluation seed.
  EvaluationPlan evaluation_plan() const;
};

ExperimentConfig load_config(const std::filesystem::path& path);

std::unique_ptr<Problem> make_problem(const ProblemConfig& config);

}  // namespace inn
