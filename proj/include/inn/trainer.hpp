// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "inn/autodiff.hpp"
#include "inn/flow.hpp"
#include "inn/mmd.hpp"
#include "inn/problems.hpp"
#include "inn/rng.hpp"

namespace inn {

struct TrainConfig {
  int epochs = 10;
  int batches_per_epoch = 100;
  int batch_size = 200;
  double lr_start = 1e-3;
  double lr_end = 1e-5;
  double w_y = 1.0;
  double w_z = 1.0;
  double w_x = 1.0;
  double w_pad = 1.0;
  KernelSpec kernel_z{};
  KernelSpec kernel_x{};
  double pad_noise = 1.0;  // std of the noise written over output padding
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double loss_y = 0.0;
  double loss_z = 0.0;
  double loss_x = 0.0;
  double loss_pad = 0.0;  // output padding + input padding + reconstruction
  double lr = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

/// lr_start * (lr_end / lr_start)^(step / total).
double lr_at(const TrainConfig& config, long step, long total);

/// Losses of the x -> [y, z] direction.
struct ForwardLosses {
  ad::Var y;    // squared error of f_y against the simulated y
  ad::Var z;    // MMD of [stopgrad(f_y), f_z] against shuffled y with fresh z
  ad::Var pad;  // mean square of the output padding
  TapedFlowOutput output;  // the forward pass itself
};

/// Losses of the [y, z] -> x direction.
struct BackwardLosses {
  ad::Var x;       // MMD of generated x against the batch's x
  ad::Var pad_in;  // mean square of the generated input padding
  ad::Var recon;   // round trip with the output padding replaced by noise
};

/// `x_padded` is batch x W with zero padding, `y_sim` the simulated batch x M.
ForwardLosses forward_losses(InnModel& model, ad::Tape& tape, const Matrix& x_padded,
                             const Matrix& y_sim, const TrainConfig& config, Rng& rng);
/// `forward`, when given, is the forward pass of `x_padded` on the same tape;
/// the round trip then reuses it instead of running the network again.
BackwardLosses backward_losses(InnModel& model, ad::Tape& tape, const Matrix& x_padded,
                               const Matrix& y_sim, const TrainConfig& config, Rng& rng,
                               const TapedFlowOutput* forward = nullptr);

/// Thrown when a loss turns non-finite or exceeds the divergence bound.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::string term, int epoch, const std::string& detail);

  const std::string& term() const { return term_; }
  int epoch() const { return epoch_; }

 private:
  std::string term_;
  int epoch_;
};

inline constexpr double kDivergenceBound = 1e6;

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Bidirectional training. Per batch the forward and backward losses are
/// back-propagated into the same accumulators, followed by one Adam step.
/// Deterministic for a fixed config and seed.
TrainHistory train(InnModel& model, const Problem& problem, const TrainConfig& config,
                   const EpochCallback& on_epoch = {});

std::pair<InnModel, TrainHistory> train(const Problem& problem, const ModelConfig& model_config,
                                        const TrainConfig& config,
                                        const EpochCallback& on_epoch = {});

}  // namespace inn
