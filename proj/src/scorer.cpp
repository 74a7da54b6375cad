#include "trace/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace trace {

int depth_index(double fraction, int L) { return static_cast<int>(std::min<long>(L, ceil_fraction(fraction, L))); }

std::vector<int> ScorerDepths::required() const {
  std::set<int> all(anchors.begin(), anchors.end());
  all.insert(features.begin(), features.end());
  all.insert(final_depth);
  return {all.begin(), all.end()};
}

ScorerDepths scorer_depths(int L, const ScorerConstants& c) {
  ScorerDepths d;
  d.final_depth = L;
  std::set<int> a;
  std::set<int> g;
  for (double f : c.anchor_fractions) a.insert(depth_index(f, L));
  for (double f : c.feature_fractions) g.insert(depth_index(f, L));
  d.anchors.assign(a.begin(), a.end());
  d.features.assign(g.begin(), g.end());
  if (d.features.size() < 3) {
    throw ConfigError("L=" + std::to_string(L) + " leaves fewer than 3 distinct feature depths");
  }
  if (d.anchors.empty()) throw ConfigError("no anchor depths");

  double z = 0.0;
  for (int l : d.anchors) {
    d.anchor_weights.push_back(std::exp(static_cast<double>(l) / L));
    z += d.anchor_weights.back();
  }
  for (double& w : d.anchor_weights) w /= z;
  return d;
}

std::vector<int> recurrence_filter(const std::vector<std::vector<int>>& topk_sets, int r_omega) {
  std::map<int, int> count;
  for (const auto& set : topk_sets) {
    for (int v : std::set<int>(set.begin(), set.end())) ++count[v];
  }
  std::vector<int> out;
  for (const auto& [v, c] : count) {
    if (c >= r_omega) out.push_back(v);
  }
  return out;
}

TrajectoryFeatures trajectory_features(std::span<const double> p) {
  const std::size_t G = p.size();
  if (G < 3) throw ConfigError("trajectory features need at least 3 feature depths");

  TrajectoryFeatures f;
  const double step = 1.0 / static_cast<double>(G - 1);
  double x_mean = 0.0;
  double p_mean = 0.0;
  for (std::size_t j = 0; j < G; ++j) {
    x_mean += static_cast<double>(j) * step;
    p_mean += p[j];
  }
  x_mean /= static_cast<double>(G);
  p_mean /= static_cast<double>(G);
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t j = 0; j < G; ++j) {
    const double dx = static_cast<double>(j) * step - x_mean;
    sxy += dx * (p[j] - p_mean);
    sxx += dx * dx;
  }
  f.slope = sxy / sxx;

  f.jump = p[1] - p[0];
  for (std::size_t j = 1; j + 1 < G; ++j) f.jump = std::max(f.jump, p[j + 1] - p[j]);

  double curv = 0.0;
  for (std::size_t j = 1; j + 1 < G; ++j) curv += p[j + 1] - 2.0 * p[j] + p[j - 1];
  f.curv = curv / static_cast<double>(G - 2);
  return f;
}

double evidence(const TrajectoryFeatures& f, const ScorerConstants& c) {
  return c.beta_slope * std::max(f.slope, 0.0) + c.beta_jump * std::max(f.jump, 0.0) +
         c.beta_curv * std::max(f.curv, 0.0);
}

std::vector<double> normalize_evidence(std::span<const double> h) {
  std::vector<double> out(h.size(), 0.0);
  if (h.empty()) return out;
  const auto [lo, hi] = std::minmax_element(h.begin(), h.end());
  const double range = *hi - *lo;
  if (range < 1e-12) return out;
  for (std::size_t i = 0; i < h.size(); ++i) out[i] = (h[i] - *lo) / range;
  return out;
}

double adaptive_alpha(double h_norm, double lambda0, double gamma_sig) {
  // the midpoint stays at sigma(0) even for an infinite gamma_sig
  const double x = h_norm == 0.5 ? 0.0 : gamma_sig * (h_norm - 0.5);
  const double sigma = 1.0 / (1.0 + std::exp(-x));
  return lambda0 + (1.0 - lambda0) * sigma;
}

namespace {

// Logit lookup for one depth record with the own-token and floor rules.
class DepthView {
 public:
  DepthView(const DepthLogits& rec, int own_token) : rec_(&rec), own_(own_token) {
    for (std::size_t i = 0; i < rec.topk_ids.size(); ++i) index_.emplace(rec.topk_ids[i], rec.topk_logits[i]);
    floor_ = rec.topk_logits.empty() ? rec.own_logit
                                     : *std::min_element(rec.topk_logits.begin(), rec.topk_logits.end());
  }

  bool stored(int v) const { return v == own_ || index_.count(v) != 0; }

  double logit(int v) const {
    if (v == own_) return rec_->own_logit;
    auto it = index_.find(v);
    return it != index_.end() ? it->second : floor_;
  }

  double log_prob(int v) const { return logit(v) - rec_->logsumexp_full; }
  double logsumexp() const { return rec_->logsumexp_full; }
  const std::vector<int>& topk() const { return rec_->topk_ids; }

 private:
  const DepthLogits* rec_;
  int own_;
  std::map<int, double> index_;
  double floor_ = 0.0;
};

}  // namespace

PositionCalibration calibrate_position(const PositionDepthLogits& record, const ScorerDepths& depths,
                                       const ScorerConstants& c, const std::string& item_id) {
  std::map<int, DepthView> view;
  for (int d : depths.required()) {
    const DepthLogits* rec = record.at_depth(d);
    if (!rec) {
      throw InputError(item_id, "candidate " + std::to_string(record.candidate_index) + " position " +
                                    std::to_string(record.position) + ": missing depth record " +
                                    std::to_string(d));
    }
    view.emplace(d, DepthView(*rec, record.own_token_id));
  }
  const int own = record.own_token_id;
  const DepthView& final_view = view.at(depths.final_depth);

  PositionCalibration out;
  out.final_logsumexp = final_view.logsumexp();

  std::vector<std::vector<int>> anchor_sets;
  for (int a : depths.anchors) anchor_sets.push_back(view.at(a).topk());
  out.omega = recurrence_filter(anchor_sets, c.r_omega);

  std::set<int> scope;
  if (!out.omega.empty()) {
    scope.insert(out.omega.begin(), out.omega.end());
    scope.insert(own);
  } else {
    for (const auto& [_, v] : view) scope.insert(v.topk().begin(), v.topk().end());
    scope.insert(own);
  }

  std::set<int> mix{own};
  for (int v : out.omega) {
    if (final_view.stored(v)) mix.insert(v);
  }

  // evidence over the normalization scope
  std::vector<int> scope_tokens(scope.begin(), scope.end());
  std::vector<double> h(scope_tokens.size());
  std::vector<double> trace(depths.features.size());
  for (std::size_t i = 0; i < scope_tokens.size(); ++i) {
    for (std::size_t j = 0; j < depths.features.size(); ++j) {
      trace[j] = view.at(depths.features[j]).log_prob(scope_tokens[i]);
    }
    h[i] = evidence(trajectory_features(trace), c);
  }
  const auto h_norm = normalize_evidence(h);

  double final_mass = 0.0;
  double calibrated_mass = 0.0;
  for (std::size_t i = 0; i < scope_tokens.size(); ++i) {
    const int v = scope_tokens[i];
    if (!mix.count(v)) continue;
    TokenCalibration tok;
    tok.token = v;
    tok.z_final = final_view.logit(v);
    for (std::size_t k = 0; k < depths.anchors.size(); ++k) {
      tok.z_anchor += depths.anchor_weights[k] * view.at(depths.anchors[k]).logit(v);
    }
    tok.h = h[i];
    tok.h_norm = h_norm[i];
    tok.alpha = adaptive_alpha(tok.h_norm, c.lambda0, c.gamma_sig);
    tok.z_calibrated = (1.0 - tok.alpha) * tok.z_final + tok.alpha * tok.z_anchor;
    final_mass += std::exp(tok.z_final - out.final_logsumexp);
    calibrated_mass += std::exp(tok.z_calibrated - out.final_logsumexp);
    out.mixed.push_back(tok);
  }

  // tokens outside the mix set keep z_L, so their share of the final-layer
  // partition function carries over unchanged
  const double tail = std::max(0.0, 1.0 - final_mass);
  out.log_denominator = out.final_logsumexp + std::log(tail + calibrated_mass);

  for (const auto& tok : out.mixed) {
    if (tok.token == own) {
      out.own_log_prob = tok.z_calibrated - out.log_denominator;
      out.own_log_prob_final = tok.z_final - out.final_logsumexp;
    }
  }
  return out;
}

CandidateScores calibrated_candidate_scores(const CandidateTrajectory& meta,
                                            std::span<const PositionDepthLogits> records,
                                            const ScorerConstants& c) {
  const auto depths = scorer_depths(meta.depth, c);
  const std::size_t n = meta.candidate_count();

  // by_candidate[i][r-1] -> record
  std::vector<std::vector<const PositionDepthLogits*>> by_candidate(n);
  for (std::size_t i = 0; i < n; ++i) {
    by_candidate[i].assign(static_cast<std::size_t>(meta.candidate_token_counts[i]), nullptr);
  }
  for (const auto& rec : records) {
    if (rec.candidate_index < 0 || static_cast<std::size_t>(rec.candidate_index) >= n) {
      throw InputError(meta.item_id, "logit record for unknown candidate " + std::to_string(rec.candidate_index));
    }
    auto& slots = by_candidate[rec.candidate_index];
    if (rec.position < 1 || static_cast<std::size_t>(rec.position) > slots.size()) {
      throw InputError(meta.item_id, "logit record position out of range");
    }
    slots[rec.position - 1] = &rec;
  }

  CandidateScores out;
  out.t.assign(n, 0.0);
  out.b_check.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& slots = by_candidate[i];
    for (std::size_t r = 0; r < slots.size(); ++r) {
      if (!slots[r]) {
        throw InputError(meta.item_id, "candidate " + std::to_string(i) + " has no logit record for position " +
                                           std::to_string(r + 1));
      }
      const auto cal = calibrate_position(*slots[r], depths, c, meta.item_id);
      out.t[i] += cal.own_log_prob;
      out.b_check[i] += cal.own_log_prob_final;
    }
    out.t[i] /= static_cast<double>(slots.size());
    out.b_check[i] /= static_cast<double>(slots.size());
  }
  return out;
}

}  // namespace trace
