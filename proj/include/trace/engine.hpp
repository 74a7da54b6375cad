#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trace/hyperparameters.hpp"
#include "trace/trajectory.hpp"

namespace trace {

struct EngineConfig {
  HyperParameters theta;
  double I_M = 0.0;  // per model, from the invariant document
  AblationVariant variant = AblationVariant::none;
};

// Which return path produced a verdict.
enum class Regime {
  md_override,     // candidate-space arm, gate passed: argmax q
  md_abstain,      // candidate-space arm, gate failed: argmax b
  scalar_trust,    // lambda = +eta
  scalar_reverse,  // lambda = -eta
  scalar_abstain,  // lambda = 0: argmax b
  early_fallback,  // max b < gamma_conf: argmax s0
  base,            // nothing applied (including paths removed by an ablation)
};

std::string_view to_string(Regime r);
std::optional<Regime> parse_regime(std::string_view name);

struct Diagnostics {
  double d_eff = 0.0;
  std::optional<int> ell_star;
  std::optional<bool> gate_flip;
  std::optional<bool> gate_logr;
  std::optional<bool> gate_H;
  std::optional<double> g_logr;
  std::optional<double> g_H;
  std::optional<double> lambda;
  double I_M = 0.0;
  bool operator==(const Diagnostics&) const = default;
};

struct Verdict {
  std::string item_id;
  std::size_t chosen_index = 0;
  Regime regime = Regime::base;
  std::vector<double> final_scores;  // the vector whose argmax was returned
  Diagnostics diagnostics;
  bool operator==(const Verdict&) const = default;
};

// One item through the routing rule. `logits` is only read when the scalar
// mix path is reached; it being empty there raises InputError naming the item.
Verdict run_item(const CandidateTrajectory& item, std::span<const PositionDepthLogits> logits,
                 const EngineConfig& cfg);

// Same routing with a precomputed scorer output t (tests and what-if runs).
Verdict run_item_with_t(const CandidateTrajectory& item, std::span<const double> t, const EngineConfig& cfg);

// Verdicts in input order for any `jobs` >= 1. The error of the lowest-index
// failing item is rethrown.
std::vector<Verdict> run_batch(const std::vector<ArchiveItem>& items, const EngineConfig& cfg, int jobs = 1);

inline constexpr std::string_view kVerdictSchema = "trace.verdict/1";

std::string serialize_verdict(const Verdict& v);
Verdict parse_verdict_line(std::string_view line, std::size_t line_number);
std::vector<Verdict> parse_verdicts(std::string_view text);
std::vector<Verdict> read_verdicts(const std::string& path);
void write_verdicts(const std::vector<Verdict>& verdicts, const std::string& path);

}  // namespace trace
