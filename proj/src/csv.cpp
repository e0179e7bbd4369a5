#include "ewfm/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <system_error>

#include "ewfm/error.hpp"

namespace ewfm {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec != std::errc{}) throw InternalError("format_double failed");
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view token) {
  token = trim(token);
  if (token.empty()) throw InvalidInput("empty numeric field");
  double v = 0.0;
  // from_chars rejects a leading '+'; accept it for hand-written configs.
  std::string_view body = token.front() == '+' ? token.substr(1) : token;
  const auto res = std::from_chars(body.data(), body.data() + body.size(), v);
  if (res.ec != std::errc{} || res.ptr != body.data() + body.size()) {
    if (body == "inf") return std::numeric_limits<double>::infinity();
    if (body == "-inf") return -std::numeric_limits<double>::infinity();
    throw InvalidInput("not a number: '" + std::string(token) + "'");
  }
  return v;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

void write_samples_csv(const std::filesystem::path& path, const Matrix& samples, const std::vector<double>* log_q,
                       std::size_t dim) {
  const std::size_t d = samples.rows() > 0 ? samples.cols() : dim;
  if (log_q && log_q->size() != samples.rows()) throw InvalidInput("log_q length does not match sample count");
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot open " + path.string() + " for writing");
  for (std::size_t j = 0; j < d; ++j) out << (j ? "," : "") << "x_" << j;
  if (log_q) out << ",log_q";
  out << '\n';
  for (std::size_t i = 0; i < samples.rows(); ++i) {
    for (std::size_t j = 0; j < d; ++j) out << (j ? "," : "") << format_double(samples(i, j));
    if (log_q) out << ',' << format_double((*log_q)[i]);
    out << '\n';
  }
  if (!out) throw InvalidInput("write failed: " + path.string());
}

SampleTable read_samples_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput(path.string() + ": missing header");
  const auto header = split(trim(line), ',');
  std::size_t d = 0;
  bool has_logq = false;
  for (std::size_t j = 0; j < header.size(); ++j) {
    const auto name = trim(header[j]);
    if (name == "x_" + std::to_string(j)) {
      ++d;
    } else if (name == "log_q" && j + 1 == header.size() && j == d) {
      has_logq = true;
    } else {
      throw InvalidInput(path.string() + ": unexpected column '" + std::string(name) + "'");
    }
  }
  if (d == 0) throw InvalidInput(path.string() + ": no coordinate columns");
  SampleTable table;
  table.samples = Matrix(0, d);
  std::vector<double> lq;
  std::vector<double> row(d);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(trim(line), ',');
    if (fields.size() != header.size()) {
      throw InvalidInput(path.string() + ":" + std::to_string(line_no) + ": expected " +
                         std::to_string(header.size()) + " fields");
    }
    for (std::size_t j = 0; j < d; ++j) row[j] = parse_double(fields[j]);
    table.samples.append_row(row);
    if (has_logq) lq.push_back(parse_double(fields[d]));
  }
  if (has_logq) table.log_q = std::move(lq);
  return table;
}

}  // namespace ewfm
