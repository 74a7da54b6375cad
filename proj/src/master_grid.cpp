#include "trace/master_grid.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "trace/common.hpp"

namespace trace {

namespace {

std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  for (auto& s : out) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
    while (!s.empty() && s.front() == ' ') s.erase(s.begin());
  }
  return out;
}

double parse_number(const std::string& s, std::size_t line, const std::string& column) {
  if (s.empty()) throw ParseError(line, "missing metric '" + column + "'");
  std::string_view v = s;
  if (v.front() == '+') v.remove_prefix(1);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ParseError(line, "column '" + column + "' is not a number: '" + s + "'");
  }
  return out;
}

const char* const kSuffixes[4] = {"_MC1_base", "_MC1_delta", "_MC2_base", "_MC2_delta"};

}  // namespace

std::vector<GridCell> parse_master_fixture(std::string_view text) {
  std::vector<std::string> lines;
  {
    std::size_t start = 0;
    while (start < text.size()) {
      std::size_t end = text.find('\n', start);
      if (end == std::string_view::npos) end = text.size();
      auto line = text.substr(start, end - start);
      if (line.find_first_not_of(" \t\r") != std::string_view::npos) lines.emplace_back(line);
      start = end + 1;
    }
  }
  if (lines.empty()) throw ParseError(0, "master fixture is empty");

  const auto header = split_csv(lines[0]);
  const std::size_t expected_cols = 3 + 4 * kGridBenchmarks;
  if (header.size() != expected_cols || header[0] != "model" || header[1] != "I_M" || header[2] != "branch") {
    throw ParseError(1, "master fixture header must be model,I_M,branch then 4 metric columns per benchmark");
  }
  std::vector<std::string> benchmarks;
  for (int b = 0; b < kGridBenchmarks; ++b) {
    const std::string& first = header[3 + 4 * b];
    const std::string suffix = kSuffixes[0];
    if (first.size() <= suffix.size() || first.compare(first.size() - suffix.size(), suffix.size(), suffix) != 0) {
      throw ParseError(1, "unexpected column '" + first + "'");
    }
    const std::string name = first.substr(0, first.size() - suffix.size());
    for (int k = 0; k < 4; ++k) {
      if (header[3 + 4 * b + k] != name + kSuffixes[k]) {
        throw ParseError(1, "expected column '" + name + kSuffixes[k] + "'");
      }
    }
    benchmarks.push_back(name);
  }

  std::vector<GridCell> cells;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::size_t line_no = li + 1;
    const auto cols = split_csv(lines[li]);
    if (cols.size() != expected_cols) {
      throw ParseError(line_no, "expected " + std::to_string(expected_cols) + " columns, got " +
                                    std::to_string(cols.size()));
    }
    if (cols[0].empty()) throw ParseError(line_no, "missing model name");
    if (cols[2] != "mix" && cols[2] != "early") throw ParseError(line_no, "branch must be mix or early");
    const double I_M = parse_number(cols[1], line_no, "I_M");
    for (int b = 0; b < kGridBenchmarks; ++b) {
      GridCell c;
      c.model_id = cols[0];
      c.benchmark_id = benchmarks[b];
      c.I_M = I_M;
      c.branch = cols[2];
      c.mc1_base = parse_number(cols[3 + 4 * b], line_no, header[3 + 4 * b]);
      c.mc1_delta = parse_number(cols[4 + 4 * b], line_no, header[4 + 4 * b]);
      c.mc2_base = parse_number(cols[5 + 4 * b], line_no, header[5 + 4 * b]);
      c.mc2_delta = parse_number(cols[6 + 4 * b], line_no, header[6 + 4 * b]);
      cells.push_back(std::move(c));
    }
  }
  if (cells.size() != static_cast<std::size_t>(kGridCells)) {
    throw ParseError(0, "master fixture has " + std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(kGridCells));
  }
  return cells;
}

std::vector<GridCell> load_master_fixture(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open master fixture '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_master_fixture(ss.str());
}

}  // namespace trace
