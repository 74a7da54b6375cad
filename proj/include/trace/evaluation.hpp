#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trace/engine.hpp"
#include "trace/master_grid.hpp"
#include "trace/trajectory.hpp"

namespace trace {

// 1 iff the lowest-index argmax lies in the truthful set.
int mc1(std::span<const double> scores, std::span<const int> truthful);

// Candidate-softmax mass on the truthful set.
double mc2(std::span<const double> scores, std::span<const int> truthful);

// Percentages in [0, 100].
struct CellResult {
  std::string model_id;
  std::string benchmark_id;
  double mc1_base = 0.0;
  double mc1_trace = 0.0;
  double mc2_base = 0.0;
  double mc2_trace = 0.0;
  std::size_t items = 0;

  double mc1_delta() const { return mc1_trace - mc1_base; }
  double mc2_delta() const { return mc2_trace - mc2_base; }
};

// Scores every archive item under base (column L) and under its verdict's
// final_scores, one cell per benchmark in order of first appearance. Items
// are joined with verdicts on item_id; a missing verdict or missing truthful
// labels raise InputError.
std::vector<CellResult> evaluate_cells(const std::string& model_id, const std::vector<ArchiveItem>& items,
                                       const std::vector<Verdict>& verdicts);

// Published grid cells as CellResults (trace = base + delta).
std::vector<CellResult> cells_from_fixture(const std::vector<GridCell>& grid);

struct GridSummary {
  std::size_t cells = 0;
  double mean_mc1_delta = 0.0;
  double mean_mc2_delta = 0.0;
  double min_mc1_delta = 0.0;
  double max_mc1_delta = 0.0;
  double min_mc2_delta = 0.0;
  double max_mc2_delta = 0.0;
  std::size_t argmax_mc1 = 0;  // index of the cell with the largest MC1 delta
  std::size_t argmax_mc2 = 0;
  std::size_t regressions_mc1 = 0;  // cells with delta <= 0
  std::size_t regressions_mc2 = 0;
};

// Any non-empty cell set.
GridSummary summarize_cells(std::span<const CellResult> cells);

// The full grid; throws InputError unless there are exactly 45 cells.
GridSummary aggregate_grid(std::span<const CellResult> cells);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Percentile bootstrap of the mean. Deterministic for a given seed.
Interval bootstrap_ci(std::span<const double> deltas, std::size_t B, double level, std::uint64_t seed);

// Exact one-sided sign test P(X >= #positive), X ~ Binomial(n, 1/2). Throws
// InputError when a delta is zero or the input is empty.
double sign_test(std::span<const double> deltas);

struct UsageStats {
  std::size_t items = 0;
  double pct_scalar = 0.0;   // d_eff <= tau_dim
  double pct_md_fire = 0.0;  // md_override
  double pct_mix = 0.0;      // scalar_trust or scalar_reverse
  double pct_early = 0.0;    // early_fallback
  bool branch_pure = true;   // not both mix and early in the stream
};

// Throws InputError on an empty stream.
UsageStats usage_stats(std::span<const Verdict> verdicts, double tau_dim);

struct UsageReport {
  std::map<std::string, UsageStats> per_benchmark;
  UsageStats pooled;            // every item weighted equally
  UsageStats benchmark_mean;    // unweighted mean of the per-benchmark figures
};

UsageReport usage_report(const std::vector<ArchiveItem>& items, const std::vector<Verdict>& verdicts,
                         double tau_dim);

// Report writers. Output bytes depend only on the input.
std::string cells_csv(std::span<const CellResult> cells);
// Inverse of cells_csv (deltas are recomputed, not read).
std::vector<CellResult> parse_cells_csv(std::string_view text);

std::string summary_json(std::span<const CellResult> cells, const GridSummary& summary);
std::string usage_json(const UsageReport& report);

inline constexpr int kPlotWidth = 640;
inline constexpr int kPlotHeight = 400;

// Candidate probabilities across depths 0..L, one polyline per candidate, and
// one vertical marker at the layer the verdict used (l* for the
// candidate-space arm, 0 for the early fallback, L otherwise).
std::string trajectory_svg(const CandidateTrajectory& item, const Verdict& verdict);
int marker_depth(const CandidateTrajectory& item, const Verdict& verdict);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace trace
