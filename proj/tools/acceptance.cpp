// SPDX-License-Identifier: Apache-2.0
// Acceptance run: one PASS/FAIL line per criterion.
//
//   1 bijectivity of random flows            6 kinematics posterior vs ABC
//   2 gradients against central differences  7 ABC sampler contracts
//   3 log-Jacobian against finite differences 8 calibration metric self-tests
//   4 kernel discrepancy sanity and power    9 bit-exact reruns of 5 and 6
//   5 GMM posterior modes
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gradient_cases.hpp"
#include "inn/abc.hpp"
#include "inn/artifact.hpp"
#include "inn/config.hpp"
#include "inn/evaluation.hpp"
#include "inn/metrics.hpp"
#include "inn/mmd.hpp"
#include "oracles.hpp"

using namespace inn;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double e : v) out(i++) = e;
  return out;
}

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Matrix full_forward(const InnModel& model, const Matrix& x) {
  const FlowOutput out = model.forward(x);
  Matrix full(x.rows(), model.dims().width);
  full << out.y, out.z, out.pad;
  return full;
}

Matrix full_inverse(const InnModel& model, const Matrix& v) {
  const FlowDims& d = model.dims();
  return model.inverse(v.leftCols(d.y), v.middleCols(d.y, d.z),
                       v.rightCols(model.output_pad_width()));
}

// Random architecture with the shipped subnet shape.
InnModel random_model(Rng& rng, int max_width, std::uint64_t seed) {
  const int width = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_width - 1)));
  ModelConfig cfg;
  cfg.blocks = 1 + static_cast<int>(rng.below(6));
  cfg.hidden = {128, 128};
  cfg.clamp = 0.5 + 4.5 * rng.uniform();
  cfg.seed = seed;
  const int x = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(width)));
  const int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(width)));
  const int z = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(width - y)));
  return InnModel({x, y, z, width}, cfg);
}

Outcome bijectivity() {
  Rng rng(101);
  double worst_fwd = 0.0;
  double worst_inv = 0.0;
  for (int m = 0; m < 100; ++m) {
    const InnModel model = random_model(rng, 32, 1000 + static_cast<std::uint64_t>(m));
    const Matrix x = rng.normal_matrix(1000, model.dims().width);
    worst_fwd = std::max(worst_fwd, oracle::max_abs_diff(full_inverse(model, full_forward(model, x)), x));
    worst_inv = std::max(worst_inv, oracle::max_abs_diff(full_forward(model, full_inverse(model, x)), x));
  }
  return {worst_fwd < 1e-9 && worst_inv < 1e-9,
          fmt("100 models, max |g(f(x))-x| %.2e, max |f(g(v))-v| %.2e (bound 1e-9)", worst_fwd,
              worst_inv)};
}

Outcome gradients() {
  double worst = 0.0;
  std::string worst_name;
  int count = 0;
  const auto check = [&](const gradient_cases::Case& c) {
    const double err = oracle::gradient_check(c.build, c.inputs);
    ++count;
    if (err >= worst) {
      worst = err;
      worst_name = c.name;
    }
  };
  for (const auto& c : gradient_cases::primitives()) check(c);
  Rng rng(102);
  for (const KernelSpec spec : {KernelSpec{KernelKind::kInverseMultiquadratic, 1.0},
                                KernelSpec{KernelKind::kMultiquadratic, 1.2}}) {
    check({std::string("mmd2 ") + std::string(kernel_name(spec.kind)),
           [spec](ad::Tape&, std::span<const ad::Var> v) { return mmd2(v[0], v[1], spec); },
           {rng.normal_matrix(6, 3), rng.normal_matrix(5, 3)}});
  }
  for (int g = 0; g < 20; ++g) check(gradient_cases::composite(2000 + static_cast<std::uint64_t>(g)));
  return {worst < 1e-4,
          fmt("%d graphs, worst relative error %.2e in %s (bound 1e-4)", count, worst,
              worst_name.c_str())};
}

Outcome log_jacobian() {
  Rng rng(103);
  double worst = 0.0;
  for (int m = 0; m < 100; ++m) {
    const InnModel model = random_model(rng, 4, 3000 + static_cast<std::uint64_t>(m));
    const Vector x = rng.normal_matrix(1, model.dims().width).row(0).transpose();
    const auto f = [&](const Vector& in) -> Vector {
      return full_forward(model, Matrix(in.transpose())).row(0).transpose();
    };
    const double det = std::abs(oracle::fd_jacobian_det(f, x));
    const double ours = std::exp(model.forward(Matrix(x.transpose())).logdet(0));
    worst = std::max(worst, oracle::rel_error(ours, det, 0.0));
  }
  return {worst < 1e-4, fmt("100 models of width <= 4, worst relative error %.2e (bound 1e-4)", worst)};
}

Outcome discrepancy() {
  const KernelSpec imq{KernelKind::kInverseMultiquadratic, 1.0};
  Rng rng(104);
  const Matrix a = rng.normal_matrix(200, 3);
  const double same = mmd2(a, a, imq);
  Matrix p(1, 2);
  Matrix q(1, 2);
  p << 1.0, 0.0;
  q << 0.0, 0.0;
  const double single = mmd2(p, q, imq);
  int rejected = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix x = rng.normal_matrix(500, 1);
    const Matrix y = 1.0 + rng.normal_matrix(500, 1).array();
    const auto test = oracle::permutation_test(x, y, oracle::Kernel::kImq, 1.0, 100,
                                               5000 + static_cast<std::uint64_t>(trial));
    if (mmd2(x, y, imq) > test.quantile(0.99)) ++rejected;
  }
  const bool singleton_ok = std::abs(single - 1.0) < 1e-12;
  return {same == 0.0 && singleton_ok && rejected >= 95,
          fmt("identical sets %.1e, unit singleton %.15g, rejected %d/100 at 1%% (need 95)", same,
              single, rejected)};
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

/// A trained model and its report, written under `dir`.
struct Experiment {
  fs::path model_path;
  std::string report;  // JSON dump
  EvaluationReport parsed;
  std::optional<InnModel> model;
  double seconds = 0.0;
};

Experiment run_experiment(const fs::path& config_path, const fs::path& dir) {
  const auto start = Clock::now();
  const ExperimentConfig cfg = load_config(config_path);
  const auto problem = make_problem(cfg.problem);
  fs::create_directories(dir);
  auto [model, history] = train(*problem, cfg.model, cfg.train);
  Experiment e;
  e.model_path = dir / "model.inn";
  save_model(e.model_path, model, cfg.to_json());
  e.parsed = evaluate(&model, *problem, cfg.evaluation_plan());
  e.report = e.parsed.to_json().dump();
  std::ofstream(dir / "report.json") << e.report << '\n';
  e.model.emplace(std::move(model));
  e.seconds = seconds_since(start);
  return e;
}

Outcome gmm_modes(const Experiment& e) {
  bool pass = true;
  std::ostringstream out;
  for (const ModeOccupancy& o : e.parsed.occupancy) {
    const double uniform = 1.0 / static_cast<double>(o.label_mode_share.size());
    double spread = 0.0;
    for (double s : o.label_mode_share) spread = std::max(spread, std::abs(s - uniform));
    const bool ok = o.correct_within >= 0.95 && o.wrong_within < 0.01 && spread <= 0.15;
    pass = pass && ok;
    out << fmt("label %d correct %.3f wrong %.4f share dev %.3f; ", o.label, o.correct_within,
               o.wrong_within, spread);
  }
  out << fmt("train+eval %.0f s", e.seconds);
  return {pass && !e.parsed.occupancy.empty(), out.str()};
}

std::set<int> mode_signs(const std::vector<double>& values, std::vector<double>& locations) {
  std::set<int> signs;
  for (const MarginalMode& m : marginal_modes(values)) {
    locations.push_back(m.location);
    if (m.location != 0.0) signs.insert(m.location > 0.0 ? 1 : -1);
  }
  return signs;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (double e : v) s += (s.empty() ? "" : " ") + fmt("%+.2f", e);
  return s;
}

// y* for the ambiguous arm configuration.
const Vector& hard_arm_target() {
  static const Vector y = vec({0.0, 1.5});
  return y;
}

Outcome kinematics(const Experiment& e, const fs::path& config_path) {
  const ExperimentConfig cfg = load_config(config_path);
  const auto problem = make_problem(cfg.problem);
  const AbcResult abc =
      abc_threshold(*problem, hard_arm_target(), 0.02, 10000, 2'000'000'000, Rng::derive(cfg.seed, 40));
  std::vector<double> abc_x2(static_cast<std::size_t>(abc.samples.rows()));
  for (Index i = 0; i < abc.samples.rows(); ++i) abc_x2[static_cast<std::size_t>(i)] = abc.samples(i, 1);
  std::vector<double> abc_modes;
  const std::set<int> abc_signs = mode_signs(abc_x2, abc_modes);

  const PosteriorSamples post =
      sample_posterior(*e.model, hard_arm_target(), 4096, Rng::derive(cfg.seed, 41));
  std::vector<double> inn_x2(static_cast<std::size_t>(post.samples.rows()));
  for (Index i = 0; i < post.samples.rows(); ++i) inn_x2[static_cast<std::size_t>(i)] = post.samples(i, 1);
  std::vector<double> inn_modes;
  const std::set<int> inn_signs = mode_signs(inn_x2, inn_modes);

  const double resim = e.parsed.resim ? e.parsed.resim->mean : INFINITY;
  const double cal = e.parsed.calibration.median_error;
  const bool pass = !abc.budget_exhausted && resim <= 0.05 && cal <= 0.05 && abc_signs.size() == 2 &&
                    inn_modes.size() == 2 && inn_signs == abc_signs;
  return {pass, fmt("resim %.4f (<= 0.05), calibration %.4f (<= 0.05), x2 modes ABC [%s] INN [%s], "
                    "train+eval %.0f s",
                    resim, cal, join(abc_modes).c_str(), join(inn_modes).c_str(), e.seconds)};
}

Outcome abc_contracts() {
  int accepted = 0;
  int verified = 0;
  const auto verify = [&](const Problem& problem, const Vector& y_star, double eps) {
    const AbcResult r = abc_threshold(problem, y_star, eps, 1000, 100'000'000, 7);
    for (Index i = 0; i < r.samples.rows(); ++i) {
      const Vector x = r.samples.row(i).transpose();
      ++accepted;
      if ((problem.simulate(std::span<const double>(x.data(), static_cast<std::size_t>(x.size()))) -
           y_star).norm() < eps) {
        ++verified;
      }
    }
    return r.samples.rows() == 1000;
  };
  const KinematicsProblem arm;
  const GmmProblem gmm;
  bool complete = verify(arm, hard_arm_target(), 0.05);
  complete = verify(arm, vec({1.5, 0.3}), 0.1) && complete;
  complete = verify(gmm, vec({0.0, 0.0, 1.0, 0.0}), 0.5) && complete;

  const std::vector<std::pair<std::size_t, double>> cases{
      {10, 0.1}, {256, 0.005}, {1000, 0.03}, {7, 1.0}, {100, 0.3}};
  const std::vector<std::size_t> expected{100, 51200, 33334, 7, 334};
  int exact = 0;
  for (std::size_t c = 0; c < cases.size(); ++c) {
    const auto [n, q] = cases[c];
    const AbcResult r = abc_quantile(arm, hard_arm_target(), q, n, 8 + c);
    if (abc_quantile_simulations(n, q) == expected[c] && r.simulations == expected[c] &&
        static_cast<std::size_t>(r.samples.rows()) == n) {
      ++exact;
    }
  }
  return {complete && verified == accepted && exact == static_cast<int>(cases.size()),
          fmt("threshold re-verified %d/%d, quantile counts exact %d/%zu", verified, accepted, exact,
              cases.size())};
}

Outcome calibration_selftests() {
  const GmmProblem gmm;
  Rng rng(108);
  const GmmDraw truth = gmm_sample(gmm.spec(), 1000, rng);
  std::vector<PosteriorSamples> posts;
  std::vector<Vector> truths;
  for (Index i = 0; i < 1000; ++i) {
    Index label = 0;
    truth.y.row(i).maxCoeff(&label);
    posts.push_back({truth.y.row(i).transpose(),
                     gmm_true_posterior(gmm.spec(), static_cast<int>(label), 4096, rng),
                     SampleSource::kAnalytic});
    truths.push_back(truth.x.row(i).transpose());
  }
  const double exact = calibration_error(posts, truths).median_error;

  EvaluationPlan plan;
  plan.test_size = 50;
  plan.samples = 128;
  plan.posterior_source = "point_mass";
  plan.seed = 9;
  const KinematicsProblem arm;
  const double point = evaluate(nullptr, arm, plan).calibration.median_error;
  return {exact < 0.02 && point == 0.5,
          fmt("exact GMM posteriors %.4f (< 0.02), point mass %.17g (== 0.5)", exact, point)};
}

Outcome reruns(const Experiment& first_gmm, const Experiment& second_gmm,
               const Experiment& first_arm, const Experiment& second_arm) {
  const bool gmm_same = read_bytes(first_gmm.model_path) == read_bytes(second_gmm.model_path) &&
                        first_gmm.report == second_gmm.report;
  const bool arm_same = read_bytes(first_arm.model_path) == read_bytes(second_arm.model_path) &&
                        first_arm.report == second_arm.report;
  return {gmm_same && arm_same, fmt("gmm model+report %s, kinematics model+report %s",
                                    gmm_same ? "identical" : "DIFFER", arm_same ? "identical" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> selected{1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::string configs = INN_SOURCE_DIR "/configs";
  std::string work = (fs::temp_directory_path() / "inn_acceptance").string();
  app.add_option("--criteria", selected, "Criteria to run")->check(CLI::Range(1, 9));
  app.add_option("--configs", configs, "Directory with gmm.json and kinematics.json");
  app.add_option("--work", work, "Scratch directory for trained models");
  CLI11_PARSE(app, argc, argv);

  const std::set<int> want(selected.begin(), selected.end());
  const fs::path gmm_config = fs::path(configs) / "gmm.json";
  const fs::path arm_config = fs::path(configs) / "kinematics.json";
  const fs::path root(work);

  std::map<std::string, Experiment> runs;
  const auto experiment = [&](const std::string& key, const fs::path& config) -> const Experiment& {
    auto it = runs.find(key);
    if (it == runs.end()) it = runs.emplace(key, run_experiment(config, root / key)).first;
    return it->second;
  };

  const std::vector<std::pair<int, std::string>> names{
      {1, "bijectivity"},         {2, "gradients"},         {3, "log-Jacobian"},
      {4, "kernel discrepancy"},  {5, "GMM posterior modes"}, {6, "kinematics posterior"},
      {7, "ABC contracts"},       {8, "calibration self-tests"}, {9, "reproducibility"}};
  const std::map<int, std::function<Outcome()>> checks{
      {1, bijectivity},
      {2, gradients},
      {3, log_jacobian},
      {4, discrepancy},
      {5, [&] { return gmm_modes(experiment("gmm", gmm_config)); }},
      {6, [&] { return kinematics(experiment("kinematics", arm_config), arm_config); }},
      {7, abc_contracts},
      {8, calibration_selftests},
      {9, [&] {
         const Experiment& g1 = experiment("gmm", gmm_config);
         const Experiment& a1 = experiment("kinematics", arm_config);
         return reruns(g1, experiment("gmm_rerun", gmm_config), a1,
                       experiment("kinematics_rerun", arm_config));
       }}};

  // Wall-clock limits; 5 and 6 include training, 6 also the ABC reference.
  const std::map<int, double> time_limits{{1, 60.0},  {2, 60.0},   {3, 60.0},  {4, 300.0},
                                          {5, 900.0}, {6, 2700.0}, {7, 60.0},  {8, 300.0}};

  int failed = 0;
  for (const auto& [id, name] : names) {
    if (!want.contains(id)) continue;
    const auto start = Clock::now();
    Outcome o;
    try {
      o = checks.at(id)();
    } catch (const std::exception& ex) {
      o = {false, std::string("error: ") + ex.what()};
    }
    const double elapsed = seconds_since(start);
    if (const auto limit = time_limits.find(id); limit != time_limits.end() && elapsed >= limit->second) {
      o.pass = false;
      o.detail += fmt(", over the %.0f s limit", limit->second);
    }
    if (!o.pass) ++failed;
    std::printf("criterion %d %s %s: %s (%.1f s)\n", id, o.pass ? "PASS" : "FAIL", name.c_str(),
                o.detail.c_str(), elapsed);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
