#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace trace {

struct HyperParameters;

// Row-norm statistics read from a checkpoint, without running the model.
// K_e / V_e come from the key and value projections at the early depth
// e = floor(rho_e L); V_m / O_m from the value and output projections at the
// middle depth m = floor(rho_m L).
struct ModelWeightStats {
  std::string model_id;
  int depth = 0;
  long vocab_size = 0;
  std::vector<double> row_norms_K_e;
  std::vector<double> row_norms_V_e;
  std::vector<double> row_norms_V_m;
  std::vector<double> row_norms_O_m;
  double final_norm_l1 = 0.0;
  int final_norm_dim = 1;

  bool operator==(const ModelWeightStats&) const = default;
};

enum class ScalarBranch { mix, early };

std::string_view to_string(ScalarBranch b);

struct InvariantReport {
  double phi_N = 0.0;
  double phi_K = 0.0;
  double phi_V = 0.0;
  double phi_O = 0.0;
  double I_M = 0.0;
  ScalarBranch branch = ScalarBranch::early;

  bool operator==(const InvariantReport&) const = default;
};

// A model-stats document: the statistics plus, once computed, the cached
// invariant so the engine never recomputes it per item.
struct ModelStatsDocument {
  ModelWeightStats stats;
  std::optional<InvariantReport> invariant;
};

// Population standard deviation over mean. Throws NumericError when the
// sequence is empty or its mean is not positive.
double rcv(std::span<const double> row_norms);

// Throws ValidationError on a malformed stats record and NumericError when
// rcv(V_m) == 0 (the mid-layer value projection has uniform rows).
InvariantReport compute_invariant(const ModelWeightStats& stats, double tau_I = 1.0);

// Cached invariant when present and self-consistent, otherwise computed.
InvariantReport fetch_or_compute_invariant(const ModelStatsDocument& doc, double tau_I = 1.0);

// Early/middle structural depths e = floor(rho_e L), m = floor(rho_m L).
int early_depth(int L, const HyperParameters& theta);
int middle_depth(int L, const HyperParameters& theta);

void validate(const ModelWeightStats& stats);

ModelStatsDocument parse_model_stats(std::string_view json_text);
ModelStatsDocument load_model_stats(const std::string& path);
std::string dump_model_stats(const ModelStatsDocument& doc);
void write_model_stats(const ModelStatsDocument& doc, const std::string& path);

std::string dump_invariant_report(const std::string& model_id, const InvariantReport& report);

}  // namespace trace
