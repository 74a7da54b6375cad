#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace trace {

// One (model, benchmark) cell of the published results grid.
struct GridCell {
  std::string model_id;
  std::string benchmark_id;
  double mc1_base = 0.0;
  double mc1_delta = 0.0;
  double mc2_base = 0.0;
  double mc2_delta = 0.0;
  double I_M = 0.0;
  std::string branch;  // "mix" or "early"
};

inline constexpr int kGridModels = 15;
inline constexpr int kGridBenchmarks = 3;
inline constexpr int kGridCells = kGridModels * kGridBenchmarks;

// Reads the CSV fixture: one row per model with I(M), branch, and for each
// benchmark the MC1 base, MC1 delta, MC2 base, MC2 delta columns. Returns the
// cells model-major, benchmarks in column order. Throws ParseError on a
// missing metric or when the grid is not 15 x 3.
std::vector<GridCell> load_master_fixture(const std::string& path);
std::vector<GridCell> parse_master_fixture(std::string_view csv_text);

}  // namespace trace
