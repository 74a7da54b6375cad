#include "trace/geometry.hpp"

#include <cmath>

#include <Eigen/SVD>

namespace trace {

std::vector<int> MidWindow::layers() const {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(std::max(0, size())));
  for (int l = first; l < end; ++l) out.push_back(l);
  return out;
}

MidWindow mid_window(int L, const HyperParameters& theta) {
  MidWindow w;
  w.first = static_cast<int>(floor_fraction(theta.rho_minus, L));
  w.end = theta.rho_plus ? static_cast<int>(floor_fraction(*theta.rho_plus, L)) : L - 1;
  if (w.first >= w.end) {
    throw ConfigError("empty mid-layer window for L=" + std::to_string(L) + " (floor(rho_minus L)=" +
                      std::to_string(w.first) + " >= floor(rho_plus L)=" + std::to_string(w.end) + ")");
  }
  return w;
}

CenteredTrajectory center(const CandidateTrajectory& S, const MidWindow& mid) {
  const std::size_t n = S.candidate_count();
  CenteredTrajectory out;
  out.mid_layers = mid.layers();
  out.X = Matrix(n, out.mid_layers.size());
  for (std::size_t j = 0; j < out.mid_layers.size(); ++j) {
    const auto l = static_cast<std::size_t>(out.mid_layers[j]);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += S.scores(i, l);
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) out.X(i, j) = S.scores(i, l) - mean;
  }
  return out;
}

double d_eff(const Matrix& X) {
  if (!all_finite(X.data())) throw NumericError("d_eff: non-finite entry in centered trajectory");
  const std::size_t n = X.rows();
  const std::size_t m = X.cols();

  // tr C = ||X||_F^2
  double trace_c = 0.0;
  for (double x : X.data()) trace_c += x * x;
  if (trace_c < kZeroTrajectoryEnergy) return 1.0;

  // tr(C^2) = ||C||_F^2 with C = X X^T symmetric
  double trace_c2 = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    const auto ra = X.row(a);
    for (std::size_t b = a; b < n; ++b) {
      const auto rb = X.row(b);
      double c = 0.0;
      for (std::size_t k = 0; k < m; ++k) c += ra[k] * rb[k];
      trace_c2 += (a == b ? 1.0 : 2.0) * c * c;
    }
  }
  return trace_c * trace_c / trace_c2;
}

int numerical_rank(const Matrix& X, double tol) {
  if (X.empty()) return 0;
  Eigen::MatrixXd M(X.rows(), X.cols());
  for (std::size_t i = 0; i < X.rows(); ++i) {
    for (std::size_t j = 0; j < X.cols(); ++j) M(i, j) = X(i, j);
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  const double cut = tol * sv(0);
  int r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cut) ++r;
  }
  return r;
}

}  // namespace trace
