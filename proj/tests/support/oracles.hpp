#pragma once

// Independent reference implementations and generators for the test suites.
// Nothing here calls into the production numerics it is used to check.

#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <span>
#include <vector>

#include "trace/common.hpp"

namespace trace::testing {

// Centered matrices of prescribed rank: X = sum_k u_k v_k^T with every u_k
// projected onto the zero-sum subspace, so columns sum to zero and rank is r
// with probability one.
class RankControlledGenerator {
 public:
  struct Sample {
    Matrix X;
    int rank = 0;
  };

  explicit RankControlledGenerator(std::uint64_t seed) : rng_(seed) {}

  // n in [2, 13], columns in [2, 80], rank in [1, min(n - 1, columns)].
  Sample next();
  Sample make(int n, int columns, int rank);

  // X = U diag(sigma) V^T with orthonormal U in the zero-sum subspace and
  // orthonormal V; requires sigma.size() <= min(n - 1, columns).
  Matrix with_singular_values(int n, int columns, std::span<const double> sigma);

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

// (sum sigma^2)^2 / sum sigma^4 from a singular value decomposition. Throws
// std::invalid_argument for the zero matrix.
double oracle_d_eff_svd(const Matrix& X);

// Singular values, descending.
std::vector<double> oracle_singular_values(const Matrix& X);

// Every argmax index (lowest on ties) of (1 - lambda) b + lambda t over the
// grid lo, lo + step, ..., hi. Grid points are lo + j * step for integer j.
std::set<std::size_t> oracle_scalar_sweep(std::span<const double> b, std::span<const double> t, double lo, double hi,
                                          double step);

// P(X >= k), X ~ Binomial(n, 1/2), by summing Pascal's triangle rows.
double oracle_binomial_tail(int n, int k);

// Population sd / mean by two-pass summation in long double.
double oracle_rcv(std::span<const double> v);

// Dense calibrated log-probability of `own` at one position given every
// depth's full logit vector. Follows the textbook definition directly: top-k
// sets by full sort, mix set Omega_r plus own, min-max over the same scope,
// and a full-vocabulary log-softmax of the calibrated logits.
struct DenseScorerInput {
  std::map<int, std::vector<double>> logits;  // depth -> full vocabulary
  std::vector<int> anchors;
  std::vector<int> features;
  int final_depth = 0;
  int own = 0;
  int k = 0;
  int r_omega = 3;
  double beta_slope = 0.3, beta_jump = 0.5, beta_curv = 0.2;
  double lambda0 = 0.5, gamma_sig = 5.0;
};

struct DenseScorerOutput {
  std::vector<double> calibrated;  // full vocabulary
  double own_log_prob = 0.0;
};

DenseScorerOutput oracle_dense_scorer(const DenseScorerInput& in);

}  // namespace trace::testing
