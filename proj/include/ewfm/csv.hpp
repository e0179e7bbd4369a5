#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ewfm/matrix.hpp"

namespace ewfm {

/// Shortest decimal string that parses back to the same binary64 value.
std::string format_double(double v);
/// Strict parse of a whole token; throws InvalidInput.
double parse_double(std::string_view token);

/// Sample file: header `x_0,...,x_{d-1}[,log_q]`, one row per sample.
struct SampleTable {
  Matrix samples;
  std::optional<std::vector<double>> log_q;
};

void write_samples_csv(const std::filesystem::path& path, const Matrix& samples,
                       const std::vector<double>* log_q = nullptr, std::size_t dim = 0);
/// Throws InvalidInput on malformed files or a header that is not the sample schema.
SampleTable read_samples_csv(const std::filesystem::path& path);

std::vector<std::string> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);

}  // namespace ewfm
