#include "trace/operators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace trace {

LayerStats layer_stats(std::span<const double> s) {
  if (s.size() < 2) throw NumericError("layer_stats needs at least two candidates");
  if (!all_finite(s)) throw NumericError("layer_stats: non-finite score");

  LayerStats out;
  const double mx = *std::max_element(s.begin(), s.end());
  out.pi.resize(s.size());
  double z = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    out.pi[i] = std::exp(s[i] - mx);
    z += out.pi[i];
  }
  for (double& p : out.pi) p /= z;

  out.margin = top_two_margin(s);
  for (double p : out.pi) {
    if (p > 0.0) out.entropy -= p * std::log(p);
  }
  return out;
}

DecisiveLayer decisive_layer(const CandidateTrajectory& S, double eps_H) {
  DecisiveLayer out;
  double best = -std::numeric_limits<double>::infinity();
  for (int l = 1; l <= S.depth; ++l) {
    const auto stats = layer_stats(S.layer(l));
    const double sharpness = stats.margin / (stats.entropy + eps_H);
    if (sharpness > best) {
      best = sharpness;
      out.layer = l;
    }
  }
  out.q = log_softmax(S.layer(out.layer));
  return out;
}

GateReport md_gate(const CandidateTrajectory& S, std::span<const double> q, const MidWindow& mid,
                   const HyperParameters& theta) {
  GateReport g;
  const auto b = S.base();
  g.flip = argmax(q) != argmax(b);

  double mid_margin = 0.0;
  for (int l = mid.first; l < mid.end; ++l) mid_margin = std::max(mid_margin, top_two_margin(S.layer(l)));
  const auto final_stats = layer_stats(b);
  g.g_logr = std::log(mid_margin / std::max(std::abs(final_stats.margin), theta.delta_r));
  g.g_H = final_stats.entropy / std::log(static_cast<double>(S.candidate_count()));

  g.pass_logr = g.g_logr > theta.tau_logr;
  g.pass_H = g.g_H > theta.tau_H;
  g.kappa = g.flip && g.pass_logr && g.pass_H;
  return g;
}

double scalar_lambda(std::span<const double> b, std::span<const double> t, double eta) {
  if (!(top_two_margin(t) > top_two_margin(b))) return 0.0;
  const std::size_t ib = argmax(b);
  return t[ib] - b[ib] > 0.0 ? eta : -eta;
}

std::vector<double> scalar_mix(std::span<const double> b, std::span<const double> t, double lambda) {
  std::vector<double> u(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) u[i] = (1.0 - lambda) * b[i] + lambda * t[i];
  return u;
}

EarlyFallback early_fallback(std::span<const double> b, std::span<const double> s0, double gamma_conf) {
  const double top = *std::max_element(b.begin(), b.end());
  if (top < gamma_conf) return {std::vector<double>(s0.begin(), s0.end()), true};
  return {std::vector<double>(b.begin(), b.end()), false};
}

}  // namespace trace
