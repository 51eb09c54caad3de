// SPDX-License-Identifier: Apache-2.0
#include "inn/trainer.hpp"

#include <cmath>

#include "inn/adam.hpp"

namespace inn {

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("epochs must be non-negative");
  if (batches_per_epoch < 1) throw std::invalid_argument("batches_per_epoch must be positive");
  if (batch_size < 2) throw std::invalid_argument("batch_size must be at least 2");
  if (!(lr_end > 0.0) || !(lr_start >= lr_end)) {
    throw std::invalid_argument("learning rates must satisfy lr_start >= lr_end > 0");
  }
  if (w_y < 0.0 || w_z < 0.0 || w_x < 0.0 || w_pad < 0.0) {
    throw std::invalid_argument("loss weights must be non-negative");
  }
  if (!(kernel_z.h > 0.0) || !(kernel_x.h > 0.0)) {
    throw std::invalid_argument("kernel bandwidths must be positive");
  }
  if (!(pad_noise >= 0.0)) throw std::invalid_argument("pad_noise must be non-negative");
}

double lr_at(const TrainConfig& config, long step, long total) {
  if (total < 1 || step < 0 || step > total) {
    throw std::invalid_argument("lr_at: need 0 <= step <= total and total >= 1");
  }
  if (step == 0) return config.lr_start;
  if (step == total) return config.lr_end;
  const double frac = static_cast<double>(step) / static_cast<double>(total);
  return config.lr_start * std::pow(config.lr_end / config.lr_start, frac);
}

TrainingDiverged::TrainingDiverged(std::string term, int epoch, const std::string& detail)
    : std::runtime_error("training diverged in " + term + " at epoch " + std::to_string(epoch) +
                         ": " + detail),
      term_(std::move(term)),
      epoch_(epoch) {}

namespace {

Matrix shuffled_rows(const Matrix& m, const std::vector<int>& perm) {
  Matrix out(m.rows(), m.cols());
  for (Index i = 0; i < m.rows(); ++i) out.row(i) = m.row(perm[static_cast<std::size_t>(i)]);
  return out;
}

ad::Var zero_scalar(ad::Tape& tape) { return tape.constant(Matrix::Zero(1, 1)); }

ad::Var mean_square(ad::Var v) { return ad::mean(ad::square(v)); }

void check_batch(const InnModel& model, const Matrix& x_padded, const Matrix& y_sim) {
  if (x_padded.rows() < 2) throw std::invalid_argument("losses need a batch of at least 2 rows");
  if (x_padded.cols() != model.dims().width || y_sim.cols() != model.dims().y ||
      y_sim.rows() != x_padded.rows()) {
    throw ShapeError("batch shape does not match the model layout");
  }
}

}  // namespace

ForwardLosses forward_losses(InnModel& model, ad::Tape& tape, const Matrix& x_padded,
                             const Matrix& y_sim, const TrainConfig& config, Rng& rng) {
  check_batch(model, x_padded, y_sim);
  const FlowDims& d = model.dims();
  const Index n = x_padded.rows();
  TapedFlowOutput out = model.forward(tape, tape.constant(x_padded));

  ForwardLosses losses;
  losses.y = d.y > 0 ? mean_square(ad::sub(out.y, tape.constant(y_sim))) : zero_scalar(tape);

  // Samples of p(y) p(z): the batch's simulated y in shuffled order next to
  // fresh standard-normal z.
  const Matrix y_marginal = shuffled_rows(y_sim, rng.permutation(static_cast<int>(n)));
  Matrix target(n, d.y + d.z);
  target.leftCols(d.y) = y_marginal;
  target.rightCols(d.z) = rng.normal_matrix(n, d.z);
  ad::Var joint = ad::concat_cols({ad::stop_gradient(out.y), out.z});
  losses.z = d.z > 0 ? mmd2(joint, tape.constant(std::move(target)), config.kernel_z)
                     : zero_scalar(tape);

  losses.pad = model.output_pad_width() > 0 ? mean_square(out.pad) : zero_scalar(tape);
  losses.output = out;
  return losses;
}

BackwardLosses backward_losses(InnModel& model, ad::Tape& tape, const Matrix& x_padded,
                               const Matrix& y_sim, const TrainConfig& config, Rng& rng,
                               const TapedFlowOutput* forward) {
  check_batch(model, x_padded, y_sim);
  const FlowDims& d = model.dims();
  const Index n = x_padded.rows();
  const int out_pad = model.output_pad_width();
  const int in_pad = model.input_pad_width();

  const Matrix y_marginal = shuffled_rows(y_sim, rng.permutation(static_cast<int>(n)));
  ad::Var generated =
      model.inverse(tape, tape.constant(y_marginal), tape.constant(rng.normal_matrix(n, d.z)),
                    tape.constant(Matrix::Zero(n, out_pad)));

  BackwardLosses losses;
  losses.x = mmd2(ad::slice_cols(generated, 0, d.x), tape.constant(x_padded.leftCols(d.x)),
                  config.kernel_x);
  losses.pad_in = in_pad > 0 ? mean_square(ad::slice_cols(generated, d.x, in_pad))
                             : zero_scalar(tape);

  if (out_pad > 0) {
    const TapedFlowOutput fwd = forward ? *forward : model.forward(tape, tape.constant(x_padded));
    ad::Var noise = tape.constant(config.pad_noise * rng.normal_matrix(n, out_pad));
    ad::Var round_trip = model.inverse(tape, fwd.y, fwd.z, noise);
    losses.recon = mean_square(ad::sub(round_trip, tape.constant(x_padded)));
  } else {
    // Without output padding the round trip is exact and carries no signal.
    losses.recon = zero_scalar(tape);
  }
  return losses;
}

namespace {

double checked(ad::Var loss, const char* term, int epoch) {
  const double v = loss.value()(0, 0);
  if (!std::isfinite(v) || v > kDivergenceBound) {
    throw TrainingDiverged(term, epoch, "loss value " + std::to_string(v));
  }
  return v;
}

// Weighted sum of the terms with non-zero weight; returns false when none.
bool weighted_total(std::initializer_list<std::pair<double, ad::Var>> terms, ad::Var& total) {
  bool any = false;
  for (const auto& [w, v] : terms) {
    if (w == 0.0) continue;
    ad::Var term = ad::scale(v, w);
    total = any ? ad::add(total, term) : term;
    any = true;
  }
  return any;
}

}  // namespace

TrainHistory train(InnModel& model, const Problem& problem, const TrainConfig& config,
                   const EpochCallback& on_epoch) {
  config.validate();
  const FlowDims d = model.dims();
  const FlowDims pd = problem.dims();
  if (pd.x != d.x || pd.y != d.y) {
    throw std::invalid_argument("problem dimensions do not match the model");
  }

  TrainHistory history;
  if (config.epochs == 0) return history;

  Rng data_rng(Rng::derive(config.seed, 1));
  Rng loss_rng(Rng::derive(config.seed, 2));
  Rng order_rng(Rng::derive(config.seed, 3));

  const Index per_epoch = static_cast<Index>(config.batches_per_epoch) * config.batch_size;
  auto [x_all, y_all] = problem.sample_joint(per_epoch, data_rng);
  const Matrix x_padded_all = model.pad_input(x_all);

  std::vector<ad::Parameter*> params = model.parameters();
  const long total_steps = static_cast<long>(config.epochs) * config.batches_per_epoch;
  long step = 0;
  const Index bs = config.batch_size;
  Matrix xb(bs, d.width);
  Matrix yb(bs, d.y);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const std::vector<int> order = order_rng.permutation(static_cast<int>(per_epoch));
    EpochRecord rec;
    rec.epoch = epoch;
    for (int b = 0; b < config.batches_per_epoch; ++b) {
      for (Index i = 0; i < bs; ++i) {
        const Index src = order[static_cast<std::size_t>(b * bs + i)];
        xb.row(i) = x_padded_all.row(src);
        yb.row(i) = y_all.row(src);
      }
      const double lr = lr_at(config, step, total_steps);
      try {
        // One tape for both directions: the round trip reuses the forward pass.
        ad::Tape tape;
        ForwardLosses f = forward_losses(model, tape, xb, yb, config, loss_rng);
        BackwardLosses r = backward_losses(model, tape, xb, yb, config, loss_rng, &f.output);
        rec.loss_y += checked(f.y, "loss_y", epoch);
        rec.loss_z += checked(f.z, "loss_z", epoch);
        rec.loss_pad += checked(f.pad, "loss_pad", epoch);
        rec.loss_x += checked(r.x, "loss_x", epoch);
        rec.loss_pad += checked(r.pad_in, "loss_pad", epoch);
        rec.loss_pad += checked(r.recon, "loss_pad", epoch);
        ad::Var total;
        if (weighted_total({{config.w_y, f.y},
                            {config.w_z, f.z},
                            {config.w_pad, f.pad},
                            {config.w_x, r.x},
                            {config.w_pad, r.pad_in},
                            {config.w_pad, r.recon}},
                           total)) {
          tape.backward(total);
        }
        ad::adam_step(params, lr);
      } catch (const NumericError& e) {
        throw TrainingDiverged("network activations", epoch, e.what());
      }
      rec.lr = lr;
      ++step;
    }
    const double nb = static_cast<double>(config.batches_per_epoch);
    rec.loss_y /= nb;
    rec.loss_z /= nb;
    rec.loss_x /= nb;
    rec.loss_pad /= nb;
    history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return history;
}

std::pair<InnModel, TrainHistory> train(const Problem& problem, const ModelConfig& model_config,
                                        const TrainConfig& config, const EpochCallback& on_epoch) {
  InnModel model(problem.dims(), model_config);
  TrainHistory history = train(model, problem, config, on_epoch);
  return {std::move(model), std::move(history)};
}

}  // namespace inn
