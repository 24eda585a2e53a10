#include "ebtrend/table_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <string_view>

#include "ebtrend/errors.hpp"

namespace ebtrend {
namespace {

std::vector<std::string> split(std::string_view line, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    std::string_view cell = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '"')) cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '"' || cell.back() == '\r'))
      cell.remove_suffix(1);
    out.emplace_back(cell);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool parse_number(const std::string& cell, double& value) {
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, value);
  return res.ec == std::errc() && res.ptr == last && std::isfinite(value);
}

struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> records;
  std::vector<std::size_t> lines;
};

RawTable read_raw(std::istream& in) {
  RawTable t;
  std::string line;
  std::size_t lineno = 0;
  char delim = ',';
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (!have_header) {
      delim = line.find('\t') != std::string::npos ? '\t' : ',';
      t.header = split(line, delim);
      have_header = true;
      continue;
    }
    auto cells = split(line, delim);
    if (cells.size() != t.header.size())
      throw ParseError("expected " + std::to_string(t.header.size()) + " fields, found " +
                           std::to_string(cells.size()),
                       lineno, std::min(cells.size(), t.header.size()) + 1);
    t.records.push_back(std::move(cells));
    t.lines.push_back(lineno);
  }
  if (!have_header) throw ParseError("empty table", 1, 1);
  if (t.header.size() < 2) throw ParseError("table needs at least two columns", 1, 1);
  return t;
}

}  // namespace

LabelledMatrix parse_labelled_matrix(std::istream& in) {
  const auto raw = read_raw(in);
  LabelledMatrix m;
  m.corner = raw.header.front();
  m.columns.assign(raw.header.begin() + 1, raw.header.end());
  const auto n = static_cast<Eigen::Index>(raw.records.size());
  const auto k = static_cast<Eigen::Index>(m.columns.size());
  m.values.resize(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& rec = raw.records[static_cast<std::size_t>(i)];
    m.rows.push_back(rec.front());
    for (Eigen::Index j = 0; j < k; ++j) {
      double v = 0.0;
      if (!parse_number(rec[static_cast<std::size_t>(j) + 1], v))
        throw ParseError("not a finite number: '" + rec[static_cast<std::size_t>(j) + 1] + "'",
                         raw.lines[static_cast<std::size_t>(i)], static_cast<std::size_t>(j) + 2);
      m.values(i, j) = v;
    }
  }
  if (n == 0) throw ParseError("table has no data rows", 2, 1);
  return m;
}

LabelledMatrix read_labelled_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  try {
    return parse_labelled_matrix(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.detail(), e.line(), e.column());
  }
}

DesignTable parse_design_table(std::istream& in) {
  const auto raw = read_raw(in);
  if (raw.records.empty()) throw ParseError("design has no rows", 2, 1);
  double probe = 0.0;
  const bool has_ids = !parse_number(raw.records.front().front(), probe);
  const std::size_t first = has_ids ? 1 : 0;
  DesignTable d;
  d.covariates.assign(raw.header.begin() + static_cast<std::ptrdiff_t>(first), raw.header.end());
  const auto n = static_cast<Eigen::Index>(raw.records.size());
  const auto p = static_cast<Eigen::Index>(d.covariates.size());
  d.x.resize(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& rec = raw.records[static_cast<std::size_t>(i)];
    if (has_ids) d.samples.push_back(rec.front());
    for (Eigen::Index j = 0; j < p; ++j) {
      const auto& cell = rec[first + static_cast<std::size_t>(j)];
      double v = 0.0;
      if (!parse_number(cell, v))
        throw ParseError("not a finite number: '" + cell + "'", raw.lines[static_cast<std::size_t>(i)],
                         first + static_cast<std::size_t>(j) + 1);
      d.x(i, j) = v;
    }
  }
  return d;
}

DesignTable read_design_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  try {
    return parse_design_table(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.detail(), e.line(), e.column());
  }
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

}  // namespace ebtrend
