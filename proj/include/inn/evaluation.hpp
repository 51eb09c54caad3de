// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "inn/metrics.hpp"

namespace inn {

struct EvaluationPlan {
  int test_size = 100;
  int samples = 1024;        // per test posterior
  int label_samples = 4096;  // per GMM label posterior
  int grid_points = 61;
  double grid_extent = 3.0;
  std::string posterior_source = "inn";  // inn | analytic | point_mass
  std::vector<double> latent_y_star;      // empty: problem default
  std::uint64_t seed = 0;
};

struct ResimSummary {
  double mean = 0.0;      // pooled over every posterior sample
  double median = 0.0;
  double map_mean = 0.0;  // at the MAP estimates only
  double map_median = 0.0;
};

struct EvaluationReport {
  std::string problem;
  std::string posterior_source;
  int test_size = 0;
  int samples = 0;
  RmseReport rmse_map;
  std::optional<ResimSummary> resim;  // absent without a simulator
  CalibrationCurve calibration;
  std::optional<LatentGrid> latent_grid;
  Vector latent_y_star;
  std::vector<ModeOccupancy> occupancy;  // GMM only, one per label

  nlohmann::json to_json() const;
};

/// Runs the metric suite on `problem`. `model` may be null unless the plan's
/// posterior source is "inn". The "point_mass" source puts every posterior
/// sample on the ground truth, a self-test of the calibration metric.
EvaluationReport evaluate(const InnModel* model, const Problem& problem,
                          const EvaluationPlan& plan);

/// y* used for the latent grid when the plan leaves it empty.
Vector default_latent_y_star(const Problem& problem);

}  // namespace inn
