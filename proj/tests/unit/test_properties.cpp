#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "oracles.hpp"
#include "trace/geometry.hpp"
#include "trace/operators.hpp"

using namespace trace;

namespace {

// Equal argmax, or the reference is a floating-point tie between the two picks.
bool same_argmax(const std::vector<double>& got, const std::vector<double>& ref) {
  const std::size_t a = argmax(got), r = argmax(ref);
  if (a == r) return true;
  const double scale = std::max(1.0, std::abs(ref[r]));
  return std::abs(ref[r] - ref[a]) <= 1e-9 * scale;
}

}  // namespace

TEST_SUITE("properties") {
  TEST_CASE("generated matrices are centered with the requested rank") {
    testing::RankControlledGenerator gen(101);
    for (int rep = 0; rep < 300; ++rep) {
      const auto s = gen.next();
      CHECK(s.rank >= 1);
      CHECK(s.rank <= static_cast<int>(s.X.rows()) - 1);
      for (std::size_t j = 0; j < s.X.cols(); ++j) {
        double sum = 0, mag = 0;
        for (std::size_t i = 0; i < s.X.rows(); ++i) {
          sum += s.X(i, j);
          mag += std::abs(s.X(i, j));
        }
        CHECK(std::abs(sum) <= 1e-12 * std::max(1.0, mag));
      }
      CHECK(numerical_rank(s.X, 1e-9) == s.rank);
    }
  }

  TEST_CASE("d_eff lies between one and the rank and matches the spectrum") {
    testing::RankControlledGenerator gen(202);
    for (int rep = 0; rep < 2000; ++rep) {
      const auto s = gen.next();
      const double d = d_eff(s.X);
      CHECK(d >= 1.0 - 1e-9);
      CHECK(d <= s.rank + 1e-9);
      const double o = testing::oracle_d_eff_svd(s.X);
      CHECK(std::abs(d - o) <= 1e-8 * o);
      if (s.X.rows() == 2) CHECK(std::abs(d - 1.0) <= 1e-9);
    }
  }

  TEST_CASE("oracle d_eff examples") {
    testing::RankControlledGenerator gen(303);
    CHECK(testing::oracle_d_eff_svd(gen.with_singular_values(4, 6, std::vector<double>{1.0})) ==
          doctest::Approx(1.0));
    CHECK(testing::oracle_d_eff_svd(gen.with_singular_values(4, 6, std::vector<double>{2.0, 1.0})) ==
          doctest::Approx(25.0 / 17.0));
    CHECK(testing::oracle_d_eff_svd(gen.with_singular_values(4, 6, std::vector<double>{1.0, 1.0, 1.0})) ==
          doctest::Approx(3.0));
    CHECK_THROWS_AS(testing::oracle_d_eff_svd(Matrix(3, 3, 0.0)), std::invalid_argument);
  }

  TEST_CASE("scalar sweep oracle") {
    const std::vector<double> b{3, 2, 1}, t{2, 3, 1};
    CHECK(testing::oracle_scalar_sweep(b, t, -100.0, 100.0, 1e-2) == std::set<std::size_t>{0, 1});
    CHECK(testing::oracle_scalar_sweep(b, b, -100.0, 100.0, 1e-1) == std::set<std::size_t>{0});

    std::mt19937_64 rng(404);
    std::uniform_real_distribution<double> u(-5, 0);
    for (int rep = 0; rep < 200; ++rep) {
      const std::vector<double> b2{u(rng), u(rng)}, t2{u(rng), u(rng)};
      const auto reach = testing::oracle_scalar_sweep(b2, t2, 0.0, 1.0, 1e-4);
      // on [0, 1] the gap is linear between its endpoint values
      const bool disagree = (b2[0] > b2[1]) != (t2[0] > t2[1]);
      CHECK(reach.size() == (disagree ? 2u : 1u));
    }
  }

  TEST_CASE("positive affine maps preserve the argmax") {
    std::mt19937_64 rng(505);
    std::uniform_real_distribution<double> u(-10, 10), a(0.01, 50);
    for (int rep = 0; rep < 2000; ++rep) {
      std::vector<double> v(2 + rep % 11);
      for (double& x : v) x = u(rng);
      const double scale = a(rng), shift = u(rng);
      std::vector<double> w(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) w[i] = scale * v[i] + shift;
      CHECK(same_argmax(w, v));
    }
  }

  TEST_CASE("any positive combination collapses to one scalar mixture") {
    std::mt19937_64 rng(606);
    std::uniform_real_distribution<double> u(-10, 0), c(-5, 5);
    for (int rep = 0; rep < 2000; ++rep) {
      const std::size_t n = 2 + rep % 8;
      std::vector<double> b(n), t(n);
      for (auto& x : b) x = u(rng);
      for (auto& x : t) x = u(rng);
      double alpha = c(rng), beta = c(rng);
      if (alpha + beta <= 0) {
        alpha = -alpha;
        beta = -beta;
      }
      if (alpha + beta <= 1e-6) continue;
      const double gamma = c(rng);
      std::vector<double> lhs(n);
      for (std::size_t i = 0; i < n; ++i) lhs[i] = alpha * b[i] + beta * t[i] + gamma;
      const auto rhs = scalar_mix(b, t, beta / (alpha + beta));
      CHECK(same_argmax(rhs, lhs));
    }
  }
}
