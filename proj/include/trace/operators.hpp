#pragma once

#include <span>
#include <vector>

#include "trace/geometry.hpp"
#include "trace/hyperparameters.hpp"
#include "trace/trajectory.hpp"

namespace trace {

// Candidate-restricted view of one layer: softmax, top-two margin, entropy (nats).
struct LayerStats {
  std::vector<double> pi;
  double margin = 0.0;
  double entropy = 0.0;
};

// Throws NumericError on non-finite input or fewer than two candidates.
LayerStats layer_stats(std::span<const double> scores);

// Sharpest layer over l in {1..L} by margin / (entropy + eps_H), ties to the
// smaller l, and the log of its candidate distribution.
struct DecisiveLayer {
  int layer = 0;
  std::vector<double> q;
};

DecisiveLayer decisive_layer(const CandidateTrajectory& S, double eps_H);

struct GateReport {
  bool flip = false;     // argmax q != argmax b
  double g_logr = 0.0;   // log(max mid margin / max(|m_L|, delta_r))
  double g_H = 0.0;      // H_L / log n
  bool pass_logr = false;
  bool pass_H = false;
  bool kappa = false;    // flip && pass_logr && pass_H
};

GateReport md_gate(const CandidateTrajectory& S, std::span<const double> q, const MidWindow& mid,
                   const HyperParameters& theta);

// +eta (trust) or -eta (reverse) when t is sharper than b, 0 otherwise. The
// sign follows the base-top shift t[i_b] - b[i_b].
double scalar_lambda(std::span<const double> b, std::span<const double> t, double eta);

// (1 - lambda) b + lambda t
std::vector<double> scalar_mix(std::span<const double> b, std::span<const double> t, double lambda);

struct EarlyFallback {
  std::vector<double> scores;
  bool fired = false;
};

// s0 when max b < gamma_conf (strict), b otherwise.
EarlyFallback early_fallback(std::span<const double> b, std::span<const double> s0, double gamma_conf);

}  // namespace trace
