// SPDX-License-Identifier: Apache-2.0
#include "inn/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "inn/abc.hpp"
#include "inn/artifact.hpp"
#include "inn/config.hpp"
#include "inn/csv.hpp"
#include "inn/evaluation.hpp"
#include "inn/metrics.hpp"
#include "inn/trainer.hpp"

namespace inn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Bad input that is the caller's fault; maps to the usage exit code.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

fs::path prepare_dir(const std::string& dir) {
  const fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw UsageError("cannot create output directory " + dir + ": " + ec.message());
  return p;
}

Vector parse_y_star(const std::string& text, int expected_width) {
  Vector y;
  try {
    y = parse_real_list(text);
  } catch (const std::runtime_error& e) {
    throw UsageError(std::string("--y-star: ") + e.what());
  }
  if (y.size() != expected_width) {
    throw UsageError("--y-star has " + std::to_string(y.size()) + " entries, the model expects " +
                     std::to_string(expected_width));
  }
  return y;
}

ModelArtifact load_artifact(const std::string& path) {
  if (path.empty()) throw UsageError("--model is required");
  if (!fs::exists(path)) throw UsageError("model file not found: " + path);
  return load_model(path);
}

void check_model_matches(const InnModel& model, const Problem& problem) {
  const FlowDims m = model.dims();
  const FlowDims p = problem.dims();
  if (m.x != p.x || m.y != p.y || m.z != p.z) {
    throw UsageError("model dimensions do not match problem '" + problem.name() + "'");
  }
}

void write_latent_grid_csv(const fs::path& path, const std::optional<LatentGrid>& grid) {
  const std::size_t n = grid ? grid->rows.size() : 0;
  Matrix rows(static_cast<Index>(n), 4);
  for (std::size_t i = 0; i < n; ++i) {
    const LatentGridRow& r = grid->rows[i];
    rows.row(static_cast<Index>(i)) << r.z0, r.z1, r.mode_id, r.distance;
  }
  write_csv(path, {"z0", "z1", "mode_id", "distance"}, rows);
}

// --- subcommands ---------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

int cmd_train(const TrainArgs& args) {
  ExperimentConfig cfg = load_config(args.config);
  if (args.seed) cfg.apply_seed(*args.seed);
  if (!args.out.empty()) cfg.output_dir = args.out;
  const auto problem = make_problem(cfg.problem);
  const fs::path dir = prepare_dir(cfg.output_dir);
  write_json(dir / "run.json", cfg.to_json());

  InnModel model(problem->dims(), cfg.model);
  const TrainHistory history = train(model, *problem, cfg.train, [](const EpochRecord& r) {
    std::fprintf(stderr, "epoch %d  L_y %.4g  L_z %.4g  L_x %.4g  L_pad %.4g  lr %.3g\n", r.epoch,
                 r.loss_y, r.loss_z, r.loss_x, r.loss_pad, r.lr);
  });

  Matrix rows(static_cast<Index>(history.epochs.size()), 6);
  for (std::size_t i = 0; i < history.epochs.size(); ++i) {
    const EpochRecord& r = history.epochs[i];
    rows.row(static_cast<Index>(i)) << r.epoch, r.loss_y, r.loss_z, r.loss_x, r.loss_pad, r.lr;
  }
  write_csv(dir / "history.csv", {"epoch", "loss_y", "loss_z", "loss_x", "loss_pad", "lr"}, rows);
  save_model(dir / "model.inn", model, cfg.to_json());
  std::cout << "model written to " << (dir / "model.inn").string() << '\n';
  return kExitOk;
}

struct SampleArgs {
  std::string model;
  std::string y_star;
  long n = 1024;
  std::uint64_t seed = 0;
  std::string out = ".";
};

int cmd_sample(const SampleArgs& args) {
  const ModelArtifact artifact = load_artifact(args.model);
  const Vector y_star = parse_y_star(args.y_star, artifact.model.dims().y);
  if (args.n < 0) throw UsageError("--n must be non-negative");
  const fs::path dir = prepare_dir(args.out);
  Matrix samples(0, artifact.model.dims().x);
  if (args.n > 0) samples = sample_posterior(artifact.model, y_star, args.n, args.seed).samples;
  write_samples_csv(dir / "samples.csv", samples);
  return kExitOk;
}

struct AbcArgs {
  std::string config;
  std::string problem;
  std::string y_star;
  std::string mode = "threshold";
  double epsilon = std::numeric_limits<double>::infinity();
  double quantile = 0.01;
  long n = 256;
  long max_sims = 10'000'000;
  std::uint64_t seed = 0;
  std::string out = ".";
};

int cmd_abc(const AbcArgs& args) {
  ProblemConfig pc;
  if (!args.config.empty()) pc = load_config(args.config).problem;
  if (!args.problem.empty()) {
    if (!args.config.empty() && args.problem != pc.name) {
      throw UsageError("--problem disagrees with the config's problem");
    }
    if (args.config.empty()) {
      pc.name = args.problem;
      pc.width.reset();
    }
  }
  if (args.config.empty() && args.problem.empty()) throw UsageError("abc needs --config or --problem");
  if (pc.name == "dataset") throw UsageError("abc needs a problem with a simulator");
  const auto problem = make_problem(pc);
  const Vector y_star = parse_y_star(args.y_star, problem->dims().y);
  if (args.n < 1) throw UsageError("--n must be positive");

  AbcResult result;
  if (args.mode == "threshold") {
    if (!(args.epsilon > 0.0)) throw UsageError("--epsilon must be positive");
    if (args.max_sims < 1) throw UsageError("--max-sims must be positive");
    result = abc_threshold(*problem, y_star, args.epsilon, static_cast<std::size_t>(args.n),
                           static_cast<std::size_t>(args.max_sims), args.seed);
  } else if (args.mode == "quantile") {
    if (!(args.quantile > 0.0 && args.quantile <= 1.0)) {
      throw UsageError("--quantile must lie in (0, 1]");
    }
    result = abc_quantile(*problem, y_star, args.quantile, static_cast<std::size_t>(args.n),
                          args.seed);
  } else {
    throw UsageError("--mode must be threshold or quantile");
  }

  const fs::path dir = prepare_dir(args.out);
  write_samples_csv(dir / "abc_samples.csv", result.samples);
  const json stats = {{"mode", args.mode},
                      {"simulations", result.simulations},
                      {"accepted", result.samples.rows()},
                      {"acceptance_rate", result.acceptance_rate()},
                      {"budget_exhausted", result.budget_exhausted}};
  write_json(dir / "abc_stats.json", stats);
  std::cout << "simulations " << result.simulations << " accepted " << result.samples.rows()
            << " acceptance_rate " << format_real(result.acceptance_rate()) << '\n';
  if (result.budget_exhausted) {
    std::cerr << "inn: simulation budget exhausted after " << result.simulations
              << " simulations with " << result.samples.rows() << " of " << args.n
              << " samples accepted\n";
    return kExitAbcExhausted;
  }
  return kExitOk;
}

struct EvaluateArgs {
  std::string model;
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
};

int cmd_evaluate(const EvaluateArgs& args) {
  ExperimentConfig cfg = load_config(args.config);
  if (args.seed) cfg.apply_seed(*args.seed);
  const auto problem = make_problem(cfg.problem);
  std::optional<ModelArtifact> artifact;
  if (cfg.evaluation.posterior_source == "inn" || !args.model.empty()) {
    artifact = load_artifact(args.model);
    check_model_matches(artifact->model, *problem);
  }

  const EvaluationPlan plan = cfg.evaluation_plan();
  if (!plan.latent_y_star.empty() &&
      static_cast<int>(plan.latent_y_star.size()) != problem->dims().y) {
    throw UsageError("evaluation.latent_y_star has the wrong width");
  }

  const EvaluationReport report =
      evaluate(artifact ? &artifact->model : nullptr, *problem, plan);
  const fs::path dir = prepare_dir(args.out);
  write_json(dir / "report.json", report.to_json());
  Matrix cal(static_cast<Index>(report.calibration.alpha.size()), 2);
  for (std::size_t i = 0; i < report.calibration.alpha.size(); ++i) {
    cal.row(static_cast<Index>(i)) << report.calibration.alpha[i],
        report.calibration.alpha_inliers[i];
  }
  write_csv(dir / "calibration.csv", {"alpha", "alpha_inl"}, cal);
  write_latent_grid_csv(dir / "latent_grid.csv", report.latent_grid);
  std::cout << report.to_json().dump() << '\n';
  return kExitOk;
}

struct GridArgs {
  std::string model;
  std::string y_star;
  int n = 61;
  double extent = 3.0;
  std::string out = ".";
};

int cmd_latent_grid(const GridArgs& args) {
  const ModelArtifact artifact = load_artifact(args.model);
  const Vector y_star = parse_y_star(args.y_star, artifact.model.dims().y);
  if (artifact.model.dims().z != 2) throw UsageError("latent grid needs a 2-D latent space");
  if (args.n < 1) throw UsageError("--n must be positive");
  if (!(args.extent > 0.0)) throw UsageError("--extent must be positive");

  // Mode centres and the simulator come from the training configuration.
  std::unique_ptr<Problem> problem;
  if (artifact.config.is_object()) {
    problem = make_problem(ExperimentConfig::from_json(artifact.config).problem);
    check_model_matches(artifact.model, *problem);
  }
  const std::vector<Vector> centers = problem ? problem->mode_centers() : std::vector<Vector>{};
  const LatentGrid grid =
      latent_grid(artifact.model, y_star, args.n, args.extent, centers, problem.get());

  const fs::path dir = prepare_dir(args.out);
  write_latent_grid_csv(dir / "latent_grid.csv", grid);
  write_json(dir / "latent_grid.json", {{"y_star", std::vector<double>(y_star.data(), y_star.data() + y_star.size())},
                                        {"radius50", grid.radius50},
                                        {"radius90", grid.radius90},
                                        {"points_per_axis", args.n},
                                        {"extent", args.extent}});
  return kExitOk;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Posterior estimation for inverse problems with invertible networks", "inn"};
  app.require_subcommand(1);
  std::function<int()> action;

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a model from a config file");
  train_cmd->add_option("--config", train_args.config, "Experiment config (JSON)")->required();
  train_cmd->add_option("--out", train_args.out, "Output directory (overrides the config)");
  train_cmd->add_option("--seed", train_args.seed, "Seed (overrides the config)");
  train_cmd->callback([&] { action = [&] { return cmd_train(train_args); }; });

  SampleArgs sample_args;
  auto* sample_cmd = app.add_subcommand("sample", "Draw posterior samples for one observation");
  sample_cmd->add_option("--model", sample_args.model, "Model file")->required();
  sample_cmd->add_option("--y-star", sample_args.y_star, "Observation, comma separated")
      ->required();
  sample_cmd->add_option("--n", sample_args.n, "Number of samples")->capture_default_str();
  sample_cmd->add_option("--seed", sample_args.seed, "Seed")->capture_default_str();
  sample_cmd->add_option("--out", sample_args.out, "Output directory")->capture_default_str();
  sample_cmd->callback([&] { action = [&] { return cmd_sample(sample_args); }; });

  AbcArgs abc_args;
  auto* abc_cmd = app.add_subcommand("abc", "Rejection-sampling reference posterior");
  abc_cmd->add_option("--config", abc_args.config, "Experiment config naming the problem");
  abc_cmd->add_option("--problem", abc_args.problem, "Built-in problem: gmm or kinematics");
  abc_cmd->add_option("--y-star", abc_args.y_star, "Observation, comma separated")->required();
  abc_cmd->add_option("--mode", abc_args.mode, "threshold or quantile")->capture_default_str();
  abc_cmd->add_option("--epsilon", abc_args.epsilon, "Acceptance distance (threshold mode)");
  abc_cmd->add_option("--quantile", abc_args.quantile, "Kept fraction (quantile mode)")
      ->capture_default_str();
  abc_cmd->add_option("--n", abc_args.n, "Number of samples to keep")->capture_default_str();
  abc_cmd->add_option("--max-sims", abc_args.max_sims, "Simulation budget (threshold mode)")
      ->capture_default_str();
  abc_cmd->add_option("--seed", abc_args.seed, "Seed")->capture_default_str();
  abc_cmd->add_option("--out", abc_args.out, "Output directory")->capture_default_str();
  abc_cmd->callback([&] { action = [&] { return cmd_abc(abc_args); }; });

  EvaluateArgs eval_args;
  auto* eval_cmd = app.add_subcommand("evaluate", "Compute the metric suite for a model");
  eval_cmd->add_option("--model", eval_args.model, "Model file");
  eval_cmd->add_option("--config", eval_args.config, "Experiment config (JSON)")->required();
  eval_cmd->add_option("--out", eval_args.out, "Output directory")->capture_default_str();
  eval_cmd->add_option("--seed", eval_args.seed, "Seed (overrides the config)");
  eval_cmd->callback([&] { action = [&] { return cmd_evaluate(eval_args); }; });

  GridArgs grid_args;
  auto* grid_cmd = app.add_subcommand("latent-grid", "Map a latent grid back to x space");
  grid_cmd->add_option("--model", grid_args.model, "Model file")->required();
  grid_cmd->add_option("--y-star", grid_args.y_star, "Observation, comma separated")->required();
  grid_cmd->add_option("--n", grid_args.n, "Grid points per axis")->capture_default_str();
  grid_cmd->add_option("--extent", grid_args.extent, "Half-width of the grid")
      ->capture_default_str();
  grid_cmd->add_option("--out", grid_args.out, "Output directory")->capture_default_str();
  grid_cmd->callback([&] { action = [&] { return cmd_latent_grid(grid_args); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    return action();
  } catch (const TrainingDiverged& e) {
    std::cerr << "inn: training diverged: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const ConfigError& e) {
    std::cerr << "inn: config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ArtifactError& e) {
    std::cerr << "inn: model error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "inn: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "inn: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "inn: numerical failure: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const std::exception& e) {
    std::cerr << "inn: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace inn::cli
