// SPDX-License-Identifier: Apache-2.0
#include "inn/csv.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace inn {

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_real(const std::string& text, const std::string& where) {
  const char* begin = text.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (text.empty() || end != begin + text.size()) {
    throw std::runtime_error("not a number '" + text + "' " + where);
  }
  return v;
}

}  // namespace

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const Matrix& rows) {
  if (static_cast<Index>(header.size()) != rows.cols()) {
    throw ShapeError("csv header has " + std::to_string(header.size()) + " columns, data has " +
                     std::to_string(rows.cols()));
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  for (Index r = 0; r < rows.rows(); ++r) {
    for (Index c = 0; c < rows.cols(); ++c) out << (c ? "," : "") << format_real(rows(r, c));
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_samples_csv(const std::filesystem::path& path, const Matrix& samples) {
  std::vector<std::string> header;
  for (Index c = 0; c < samples.cols(); ++c) header.push_back("x_" + std::to_string(c));
  write_csv(path, header, samples);
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": missing header");
  CsvTable table;
  table.header = split(line, ',');
  const std::size_t cols = table.header.size();
  std::vector<double> values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split(line, ',');
    const std::string where = "at " + path.string() + ":" + std::to_string(line_no);
    if (fields.size() != cols) {
      throw std::runtime_error("expected " + std::to_string(cols) + " fields " + where);
    }
    for (const auto& f : fields) values.push_back(parse_real(f, where));
  }
  const auto rows = static_cast<Index>(cols == 0 ? 0 : values.size() / cols);
  table.rows = Matrix(rows, static_cast<Index>(cols));
  std::copy(values.begin(), values.end(), table.rows.data());
  return table;
}

Vector parse_real_list(const std::string& text) {
  const auto fields = split(text, ',');
  Vector out(static_cast<Index>(fields.size()));
  for (std::size_t i = 0; i < fields.size(); ++i) {
    const std::string& f = fields[i];
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    const std::string trimmed = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
    out(static_cast<Index>(i)) = parse_real(trimmed, "in list '" + text + "'");
  }
  return out;
}

}  // namespace inn
