// SPDX-License-Identifier: Apache-2.0
#include "inn/artifact.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "inn/csv.hpp"

namespace inn {

using nlohmann::json;

void save_model(const std::filesystem::path& path, const InnModel& model, const json& config) {
  std::ofstream out(path);
  if (!out) throw ArtifactError("cannot write " + path.string());
  const FlowDims& d = model.dims();
  const ModelConfig& mc = model.config();
  const json model_j = {{"blocks", mc.blocks},
                        {"hidden", mc.hidden},
                        {"slope", mc.slope},
                        {"clamp", mc.clamp},
                        {"seed", mc.seed}};
  out << "inn-model " << kArtifactVersion << '\n';
  out << "dims " << d.x << ' ' << d.y << ' ' << d.z << ' ' << d.width << '\n';
  out << "model " << model_j.dump() << '\n';
  out << "config " << config.dump() << '\n';
  out << "layers " << model.layers().size() << '\n';
  for (const auto& layer : model.layers()) {
    if (const auto* p = std::get_if<PermutationLayer>(&layer)) {
      out << "perm";
      for (int c : p->perm()) out << ' ' << c;
      out << '\n';
    } else {
      out << "block\n";
    }
  }
  const auto params = model.parameters();
  out << "parameters " << params.size() << '\n';
  for (const ad::Parameter* p : params) {
    out << "param " << p->name << ' ' << p->value.rows() << ' ' << p->value.cols() << '\n';
    for (Index i = 0; i < p->value.size(); ++i) {
      out << (i ? " " : "") << format_real(p->value.data()[i]);
    }
    out << '\n';
  }
  out << "end\n";
  if (!out) throw ArtifactError("failed writing " + path.string());
}

namespace {

class LineReader {
 public:
  LineReader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

  /// Next line, which must start with `keyword`; returns the rest.
  std::istringstream expect(const std::string& keyword) {
    std::string line;
    if (!std::getline(in_, line)) fail("unexpected end of file, wanted '" + keyword + "'");
    ++line_no_;
    std::istringstream fields(line);
    std::string head;
    fields >> head;
    if (head != keyword) fail("expected '" + keyword + "', found '" + head + "'");
    return fields;
  }

  std::string raw_line() {
    std::string line;
    if (!std::getline(in_, line)) fail("unexpected end of file");
    ++line_no_;
    return line;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ArtifactError(path_ + ":" + std::to_string(line_no_) + ": " + what);
  }

 private:
  std::istream& in_;
  std::string path_;
  int line_no_ = 0;
};

std::string rest_of(std::istringstream& fields) {
  std::string rest;
  std::getline(fields >> std::ws, rest);
  return rest;
}

}  // namespace

ModelArtifact load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArtifactError("cannot read model " + path.string());
  LineReader r(in, path.string());

  int version = 0;
  if (!(r.expect("inn-model") >> version) || version != kArtifactVersion) {
    r.fail("unsupported model format version");
  }
  FlowDims dims;
  if (!(r.expect("dims") >> dims.x >> dims.y >> dims.z >> dims.width)) r.fail("bad dims line");

  ModelConfig mc;
  json config;
  try {
    auto model_fields = r.expect("model");
    const json mj = json::parse(rest_of(model_fields));
    mc.blocks = mj.at("blocks").get<int>();
    mc.hidden = mj.at("hidden").get<std::vector<int>>();
    mc.slope = mj.at("slope").get<double>();
    mc.clamp = mj.at("clamp").get<double>();
    mc.seed = mj.at("seed").get<std::uint64_t>();
    auto config_fields = r.expect("config");
    config = json::parse(rest_of(config_fields));
  } catch (const json::exception& e) {
    r.fail(std::string("bad model header: ") + e.what());
  }

  ModelArtifact artifact{[&] {
                           try {
                             return InnModel(dims, mc);
                           } catch (const std::exception& e) {
                             r.fail(e.what());
                           }
                         }(),
                         std::move(config)};
  InnModel& model = artifact.model;

  std::size_t layer_count = 0;
  if (!(r.expect("layers") >> layer_count)) r.fail("bad layers line");
  if (layer_count < model.layers().size()) r.fail("layer count does not match the model");
  for (std::size_t i = 0; i < layer_count; ++i) {
    std::istringstream fields(r.raw_line());
    std::string kind;
    fields >> kind;
    const bool existing = i < model.layers().size();
    if (kind == "block") {
      if (!existing || !std::holds_alternative<CouplingBlock>(model.layers()[i])) {
        r.fail("layer " + std::to_string(i) + " does not match the model");
      }
      continue;
    }
    if (kind != "perm") r.fail("unknown layer kind '" + kind + "'");
    std::vector<int> perm;
    int c = 0;
    while (fields >> c) perm.push_back(c);
    if (static_cast<int>(perm.size()) != dims.width) r.fail("permutation has the wrong size");
    try {
      if (!existing) {
        model.append_permutation(std::move(perm));
      } else if (std::holds_alternative<PermutationLayer>(model.layers()[i])) {
        model.layers()[i] = PermutationLayer(std::move(perm));
      } else {
        r.fail("layer " + std::to_string(i) + " does not match the model");
      }
    } catch (const std::invalid_argument& e) {
      r.fail(e.what());
    }
  }

  const auto params = model.parameters();
  std::size_t param_count = 0;
  if (!(r.expect("parameters") >> param_count) || param_count != params.size()) {
    r.fail("parameter count does not match the model");
  }
  for (ad::Parameter* p : params) {
    std::string name;
    Index rows = 0;
    Index cols = 0;
    if (!(r.expect("param") >> name >> rows >> cols)) r.fail("bad param line");
    if (name != p->name || rows != p->value.rows() || cols != p->value.cols()) {
      r.fail("parameter '" + name + "' does not match '" + p->name + "' " +
             shape_string(p->value));
    }
    const std::string values = r.raw_line();
    const char* cursor = values.c_str();
    for (Index i = 0; i < p->value.size(); ++i) {
      char* end = nullptr;
      const double v = std::strtod(cursor, &end);
      if (end == cursor) r.fail("too few values for parameter '" + name + "'");
      p->value.data()[i] = v;
      cursor = end;
    }
    while (*cursor == ' ') ++cursor;
    if (*cursor != '\0') r.fail("trailing values for parameter '" + name + "'");
  }
  r.expect("end");
  return artifact;
}

}  // namespace inn
