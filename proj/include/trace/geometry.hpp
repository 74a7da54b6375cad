#pragma once

#include <vector>

#include "trace/common.hpp"
#include "trace/hyperparameters.hpp"
#include "trace/trajectory.hpp"

namespace trace {

// Interior layer window {l : l_minus <= l < l_plus} with l_minus = floor(rho_minus L)
// and l_plus = floor(rho_plus L). Under the default rule rho_plus = 1 - 1/L the
// window is {floor(L/2), ..., L - 2}.
struct MidWindow {
  int first = 0;
  int end = 0;  // exclusive

  int size() const { return end - first; }
  std::vector<int> layers() const;
  bool contains(int l) const { return l >= first && l < end; }
};

// Throws ConfigError when the window is empty for this depth.
MidWindow mid_window(int L, const HyperParameters& theta);

// Mid-window scores with the per-layer candidate mean removed: every column
// of X sums to zero.
struct CenteredTrajectory {
  Matrix X;  // n x |mid|
  std::vector<int> mid_layers;
};

CenteredTrajectory center(const CandidateTrajectory& S, const MidWindow& mid);

// Values of ||X||_F^2 below this count as a zero trajectory.
inline constexpr double kZeroTrajectoryEnergy = 1e-24;

// Participation ratio (tr C)^2 / tr(C^2) of C = X X^T, from the trace
// identities only. A numerically zero X yields exactly 1. Throws NumericError
// on non-finite entries.
double d_eff(const Matrix& X);
inline double d_eff(const CenteredTrajectory& X) { return d_eff(X.X); }

// Number of singular values above tol * sigma_max (0 for the zero matrix).
// SVD-backed; meant for tests and diagnostics, not the routing path.
int numerical_rank(const Matrix& X, double tol);

}  // namespace trace
