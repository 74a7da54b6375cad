#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace trace {

// Routing overrides used by the ablation study. `none` is the published rule.
enum class AblationVariant {
  none,
  force_md,
  force_scalar,
  drop_mix,
  drop_early,
  drop_both_scalar,
  drop_md,
  force_mix_all_models,
  force_early_all_models,
};

inline constexpr std::array<AblationVariant, 9> kAllVariants = {
    AblationVariant::none,
    AblationVariant::force_md,
    AblationVariant::force_scalar,
    AblationVariant::drop_mix,
    AblationVariant::drop_early,
    AblationVariant::drop_both_scalar,
    AblationVariant::drop_md,
    AblationVariant::force_mix_all_models,
    AblationVariant::force_early_all_models,
};

std::string_view to_string(AblationVariant v);
std::optional<AblationVariant> parse_variant(std::string_view name);

// Constants of the trajectory scorer.
struct ScorerConstants {
  std::vector<double> anchor_fractions{0.2692, 0.5769, 0.8461, 1.0};
  std::vector<double> feature_fractions{0.50, 0.6923, 0.8461, 1.0};
  int topk_min = 50;
  double topk_vocab_fraction = 0.005;
  int r_omega = 3;
  double beta_slope = 0.3;
  double beta_jump = 0.5;
  double beta_curv = 0.2;
  double lambda0 = 0.5;
  double gamma_sig = 5.0;

  // k = max{topk_min, ceil(topk_vocab_fraction * |V|)}
  int topk_cutoff(long vocab_size) const;

  bool operator==(const ScorerConstants&) const = default;
};

// The frozen hyperparameter set. Defaults are the published values.
struct HyperParameters {
  double rho_minus = 0.50;
  // Upper window edge. Empty means the per-model rule rho_plus = 1 - 1/L,
  // which puts the exclusive edge at L - 1.
  std::optional<double> rho_plus;
  double rho_e = 0.20;
  double rho_m = 0.50;
  double tau_dim = 1.0015;
  double tau_I = 1.0;
  double tau_logr = 1.0;
  double tau_H = 0.7;
  double eps_H = 0.10;
  double delta_r = 1e-12;
  double eta = 1.0;
  double gamma_conf = -1.0;
  ScorerConstants scorer;
  AblationVariant ablation_variant = AblationVariant::none;

  // Throws ConfigError when an invariant on the values is broken.
  void validate() const;

  bool operator==(const HyperParameters&) const = default;
};

// Structured-text (JSON) form. Keys mirror the field names above; unknown
// keys are rejected, missing keys keep their default.
HyperParameters parse_hyperparameters(std::string_view json_text);
HyperParameters load_hyperparameters(const std::string& path);
std::string dump_hyperparameters(const HyperParameters& theta);

}  // namespace trace
