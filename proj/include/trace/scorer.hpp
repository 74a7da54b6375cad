#pragma once

// Trajectory scorer: rescoring of the candidates in which every token's
// final-layer logit is blended with a depth-weighted mixture of anchor-layer
// logits, by an amount that grows with the token's cross-depth support.
//
// Input is sparse: per continuation position and probed depth only the top-k
// logits, the own-token logit and the full-vocabulary log-sum-exp are stored.
// Consequences of that storage, all exact or conservative:
//  * The mix set is Omega_r restricted to tokens whose final-layer logit is
//    stored, plus the candidate's own token. Everything else keeps z_L, so the
//    final-layer log-sum-exp gives the unchanged tail mass exactly.
//  * A mixed token missing from the top-k list at some other depth takes that
//    depth's smallest stored top-k logit, an upper bound on its true value.
//  * Evidence is min-max normalized over Omega_r plus the own token when
//    Omega_r is non-empty, else over every stored token of the position.

#include <span>
#include <vector>

#include "trace/hyperparameters.hpp"
#include "trace/trajectory.hpp"

namespace trace {

// min{L, ceil(f L)}
int depth_index(double fraction, int L);

struct ScorerDepths {
  std::vector<int> anchors;              // A, ascending, distinct
  std::vector<int> features;             // G, ascending, distinct
  std::vector<double> anchor_weights;    // aligned with anchors, proportional to exp(l/L), sum 1
  int final_depth = 0;                   // L

  // A u G u {L}, ascending.
  std::vector<int> required() const;
};

// Throws ConfigError when fewer than three distinct feature depths remain.
ScorerDepths scorer_depths(int L, const ScorerConstants& c);

// Tokens present in at least r_omega of the per-anchor top-k sets, ascending.
std::vector<int> recurrence_filter(const std::vector<std::vector<int>>& topk_sets, int r_omega);

struct TrajectoryFeatures {
  double slope = 0.0;  // least-squares slope over x_j = (j-1)/(|G|-1)
  double jump = 0.0;   // largest consecutive increase
  double curv = 0.0;   // mean second difference
};

// Log-probability trace over the feature depths in depth order. Throws
// ConfigError for fewer than three points.
TrajectoryFeatures trajectory_features(std::span<const double> p);

// beta_s [slope]+ + beta_j [jump]+ + beta_c [curv]+
double evidence(const TrajectoryFeatures& f, const ScorerConstants& c);

// Min-max to [0,1]; a range below 1e-12 maps everything to 0.
std::vector<double> normalize_evidence(std::span<const double> h);

// lambda0 + (1 - lambda0) sigmoid(gamma_sig (h_norm - 1/2))
double adaptive_alpha(double h_norm, double lambda0, double gamma_sig);

struct TokenCalibration {
  int token = 0;
  double z_final = 0.0;
  double z_anchor = 0.0;  // depth-weighted anchor mixture
  double h = 0.0;
  double h_norm = 0.0;
  double alpha = 0.0;
  double z_calibrated = 0.0;
};

struct PositionCalibration {
  std::vector<int> omega;                 // recurrence-filtered tokens
  std::vector<TokenCalibration> mixed;    // the mix set, ascending token id
  double final_logsumexp = 0.0;           // log-sum-exp of z_L over the vocabulary
  double log_denominator = 0.0;           // log-sum-exp of the calibrated logits
  double own_log_prob = 0.0;              // calibrated log-softmax at the own token
  double own_log_prob_final = 0.0;        // final-layer log-softmax at the own token
};

// Throws InputError when a required depth record is missing.
PositionCalibration calibrate_position(const PositionDepthLogits& record, const ScorerDepths& depths,
                                       const ScorerConstants& c, const std::string& item_id = {});

struct CandidateScores {
  std::vector<double> t;        // calibrated length-normalized scores
  std::vector<double> b_check;  // same aggregation on the raw final-layer logits
};

// Throws InputError when a candidate position or a required depth is missing.
CandidateScores calibrated_candidate_scores(const CandidateTrajectory& meta,
                                            std::span<const PositionDepthLogits> records,
                                            const ScorerConstants& c);

}  // namespace trace
