// SPDX-License-Identifier: Apache-2.0
#include "inn/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "inn/csv.hpp"

namespace inn {

using nlohmann::json;

namespace {

// Walks one JSON object, remembering which keys were consumed so that
// leftovers can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where(key) + ": " + e.what());
    }
  }

  void get_kernel(const char* key, KernelSpec& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    ObjectReader r(j_.at(key), where(key));
    std::string kind(kernel_name(out.kind));
    r.get("kind", kind);
    r.get("h", out.h);
    r.finish();
    try {
      out.kind = parse_kernel_kind(kind);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(where(key) + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string where(const char* key) const { return path_ + "." + key; }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.contains(key)) throw ConfigError(path_ + ": unknown key '" + key + "'");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

json kernel_json(const KernelSpec& k) {
  return {{"kind", std::string(kernel_name(k.kind))}, {"h", k.h}};
}

int default_width(const std::string& problem) {
  if (problem == "gmm") return 16;
  if (problem == "kinematics") return 4;
  return 0;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  ObjectReader root(j, "config");
  root.get("seed", c.seed);
  root.get("output_dir", c.output_dir);

  if (const json* p = root.child("problem")) {
    ObjectReader r(*p, "config.problem");
    r.get("name", c.problem.name);
    r.get("latent_dim", c.problem.latent);
    int width = 0;
    r.get("width", width);
    if (width != 0) c.problem.width = width;
    if (const json* g = r.child("gmm")) {
      ObjectReader gr(*g, "config.problem.gmm");
      gr.get("radius", c.problem.gmm.radius);
      gr.get("angle_offset_deg", c.problem.gmm.angle_offset_deg);
      gr.get("sigma", c.problem.gmm.sigma);
      gr.get("labels", c.problem.gmm.labels);
      gr.get("label_count", c.problem.gmm.label_count);
      gr.finish();
    }
    if (const json* k = r.child("kinematics")) {
      ObjectReader kr(*k, "config.problem.kinematics");
      kr.get("lengths", c.problem.kinematics.lengths);
      kr.get("prior_std", c.problem.kinematics.prior_std);
      kr.finish();
    }
    if (const json* d = r.child("dataset")) {
      ObjectReader dr(*d, "config.problem.dataset");
      dr.get("path", c.problem.dataset_path);
      dr.get("x_dim", c.problem.dataset_x_dim);
      dr.finish();
    }
    r.finish();
  } else {
    throw ConfigError("config: missing 'problem'");
  }

  if (const json* m = root.child("model")) {
    ObjectReader r(*m, "config.model");
    r.get("blocks", c.model.blocks);
    r.get("hidden", c.model.hidden);
    r.get("slope", c.model.slope);
    r.get("clamp", c.model.clamp);
    r.finish();
  }

  if (const json* t = root.child("train")) {
    ObjectReader r(*t, "config.train");
    r.get("epochs", c.train.epochs);
    r.get("batches_per_epoch", c.train.batches_per_epoch);
    r.get("batch_size", c.train.batch_size);
    r.get("lr_start", c.train.lr_start);
    r.get("lr_end", c.train.lr_end);
    r.get("pad_noise", c.train.pad_noise);
    r.get_kernel("kernel_z", c.train.kernel_z);
    r.get_kernel("kernel_x", c.train.kernel_x);
    if (const json* w = r.child("weights")) {
      ObjectReader wr(*w, "config.train.weights");
      wr.get("y", c.train.w_y);
      wr.get("z", c.train.w_z);
      wr.get("x", c.train.w_x);
      wr.get("pad", c.train.w_pad);
      wr.finish();
    }
    r.finish();
  }

  if (const json* e = root.child("evaluation")) {
    ObjectReader r(*e, "config.evaluation");
    r.get("test_size", c.evaluation.test_size);
    r.get("samples", c.evaluation.samples);
    r.get("label_samples", c.evaluation.label_samples);
    r.get("grid_points", c.evaluation.grid_points);
    r.get("grid_extent", c.evaluation.grid_extent);
    r.get("posterior_source", c.evaluation.posterior_source);
    r.get("latent_y_star", c.evaluation.latent_y_star);
    r.finish();
  }
  root.finish();

  const auto& pn = c.problem.name;
  require(pn == "gmm" || pn == "kinematics" || pn == "dataset",
          "config.problem.name: unknown problem '" + pn + "'");
  if (!c.problem.width && pn != "dataset") c.problem.width = default_width(pn);
  require(c.problem.width.has_value(), "config.problem.width is required for dataset problems");
  require(c.problem.latent >= 0, "config.problem.latent_dim must be non-negative");
  require(pn != "dataset" || (!c.problem.dataset_path.empty() && c.problem.dataset_x_dim > 0),
          "config.problem.dataset needs 'path' and a positive 'x_dim'");
  require(c.problem.gmm.sigma >= 0.0, "config.problem.gmm.sigma must be non-negative");
  if (pn != "dataset") {
    const int d = pn == "gmm" ? 2 : 4;
    const int m = pn == "gmm" ? c.problem.gmm.label_count : 2;
    require(*c.problem.width >= std::max(d, m + c.problem.latent),
            "config.problem.width must be at least max(D, M + latent_dim) = " +
                std::to_string(std::max(d, m + c.problem.latent)));
  }
  require(c.model.blocks >= 1, "config.model.blocks must be at least 1");
  require(c.model.slope >= 0.0 && c.model.slope < 1.0, "config.model.slope must lie in [0, 1)");
  require(c.model.clamp > 0.0, "config.model.clamp must be positive");
  for (int h : c.model.hidden) require(h > 0, "config.model.hidden widths must be positive");
  try {
    c.train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config.train: ") + e.what());
  }
  const auto& src = c.evaluation.posterior_source;
  require(src == "inn" || src == "analytic" || src == "point_mass",
          "config.evaluation.posterior_source must be inn, analytic or point_mass");
  require(c.evaluation.test_size >= 1, "config.evaluation.test_size must be positive");
  require(c.evaluation.samples >= 100, "config.evaluation.samples must be at least 100");
  require(c.evaluation.label_samples >= 1, "config.evaluation.label_samples must be positive");
  require(c.evaluation.grid_points >= 1, "config.evaluation.grid_points must be positive");
  require(c.evaluation.grid_extent > 0.0, "config.evaluation.grid_extent must be positive");
  c.apply_seed(c.seed);
  return c;
}

json ExperimentConfig::to_json() const {
  json problem_j = {{"name", problem.name}, {"latent_dim", problem.latent}};
  if (problem.width) problem_j["width"] = *problem.width;
  if (problem.name == "gmm") {
    problem_j["gmm"] = {{"radius", problem.gmm.radius},
                        {"angle_offset_deg", problem.gmm.angle_offset_deg},
                        {"sigma", problem.gmm.sigma},
                        {"labels", problem.gmm.labels},
                        {"label_count", problem.gmm.label_count}};
  } else if (problem.name == "kinematics") {
    problem_j["kinematics"] = {{"lengths", problem.kinematics.lengths},
                               {"prior_std", problem.kinematics.prior_std}};
  } else {
    problem_j["dataset"] = {{"path", problem.dataset_path}, {"x_dim", problem.dataset_x_dim}};
  }
  return {
      {"seed", seed},
      {"output_dir", output_dir},
      {"problem", problem_j},
      {"model",
       {{"blocks", model.blocks},
        {"hidden", model.hidden},
        {"slope", model.slope},
        {"clamp", model.clamp}}},
      {"train",
       {{"epochs", train.epochs},
        {"batches_per_epoch", train.batches_per_epoch},
        {"batch_size", train.batch_size},
        {"lr_start", train.lr_start},
        {"lr_end", train.lr_end},
        {"pad_noise", train.pad_noise},
        {"kernel_z", kernel_json(train.kernel_z)},
        {"kernel_x", kernel_json(train.kernel_x)},
        {"weights", {{"y", train.w_y}, {"z", train.w_z}, {"x", train.w_x}, {"pad", train.w_pad}}}}},
      {"evaluation",
       {{"test_size", evaluation.test_size},
        {"samples", evaluation.samples},
        {"label_samples", evaluation.label_samples},
        {"grid_points", evaluation.grid_points},
        {"grid_extent", evaluation.grid_extent},
        {"posterior_source", evaluation.posterior_source},
        {"latent_y_star", evaluation.latent_y_star}}},
  };
}

void ExperimentConfig::apply_seed(std::uint64_t new_seed) {
  seed = new_seed;
  model.seed = Rng::derive(seed, 10);
  train.seed = Rng::derive(seed, 20);
}

std::uint64_t ExperimentConfig::evaluation_seed() const { return Rng::derive(seed, 30); }

EvaluationPlan ExperimentConfig::evaluation_plan() const {
  EvaluationPlan plan;
  plan.test_size = evaluation.test_size;
  plan.samples = evaluation.samples;
  plan.label_samples = evaluation.label_samples;
  plan.grid_points = evaluation.grid_points;
  plan.grid_extent = evaluation.grid_extent;
  plan.posterior_source = evaluation.posterior_source;
  plan.latent_y_star = evaluation.latent_y_star;
  plan.seed = evaluation_seed();
  return plan;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return ExperimentConfig::from_json(j);
}

std::unique_ptr<Problem> make_problem(const ProblemConfig& config) {
  const int width = config.width.value_or(default_width(config.name));
  if (config.name == "gmm") {
    return std::make_unique<GmmProblem>(config.gmm, width, config.latent);
  }
  if (config.name == "kinematics") {
    return std::make_unique<KinematicsProblem>(config.kinematics, width, config.latent);
  }
  if (config.name == "dataset") {
    CsvTable table = read_csv(config.dataset_path);
    const Index dx = config.dataset_x_dim;
    if (dx >= table.rows.cols()) {
      throw ConfigError("dataset " + config.dataset_path + " has no y columns");
    }
    Matrix x = table.rows.leftCols(dx);
    Matrix y = table.rows.rightCols(table.rows.cols() - dx);
    return std::make_unique<DatasetProblem>("dataset", std::move(x), std::move(y), width,
                                            config.latent);
  }
  throw ConfigError("unknown problem '" + config.name + "'");
}

}  // namespace inn
