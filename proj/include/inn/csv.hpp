// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "inn/matrix.hpp"

namespace inn {

/// 17 significant digits; parses back to the identical double.
std::string format_real(double v);

struct CsvTable {
  std::vector<std::string> header;
  Matrix rows;
};

/// Writes a header line and one line per matrix row.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const Matrix& rows);

/// Header `x_0,...,x_{D-1}`.
void write_samples_csv(const std::filesystem::path& path, const Matrix& samples);

/// Strict reader: every line must have exactly as many numeric fields as the
/// header. Throws std::runtime_error naming the offending line otherwise.
CsvTable read_csv(const std::filesystem::path& path);

/// Parses "a,b,c" into a vector of reals.
Vector parse_real_list(const std::string& text);

}  // namespace inn
