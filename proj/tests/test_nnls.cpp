#include <doctest.h>

#include <random>

#include "noon/nnls.hpp"

using namespace noon;

namespace {

// Exhaustive oracle: best equality-constrained solution over every support.
Eigen::VectorXd brute_force(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  const int n = static_cast<int>(A.cols());
  double best = 1e300;
  Eigen::VectorXd best_x;
  for (int mask = 1; mask < (1 << n); ++mask) {
    std::vector<int> s;
    for (int j = 0; j < n; ++j)
      if (mask >> j & 1) s.push_back(j);
    const int k = static_cast<int>(s.size());
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(k + 1, k + 1);
    Eigen::VectorXd r = Eigen::VectorXd::Zero(k + 1);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) K(i, j) = A.col(s[i]).dot(A.col(s[j]));
      K(i, k) = K(k, i) = 1.0;
      r(i) = A.col(s[i]).dot(b);
    }
    r(k) = 1.0;
    const Eigen::VectorXd y = K.fullPivLu().solve(r);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    bool ok = true;
    for (int i = 0; i < k; ++i) {
      if (y(i) < -1e-12) ok = false;
      x(s[i]) = y(i);
    }
    if (!ok) continue;
    const double f = (A * x - b).squaredNorm();
    if (f < best) best = f, best_x = x;
  }
  return best_x;
}

}  // namespace

TEST_SUITE("nnls") {

TEST_CASE("matches the exhaustive oracle") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 3 + trial % 5, m = 12;
    Eigen::MatrixXd A(m, n);
    Eigen::VectorXd b(m);
    for (int i = 0; i < m; ++i) {
      b(i) = g(rng);
      for (int j = 0; j < n; ++j) A(i, j) = g(rng);
    }
    const SimplexLsResult r = simplex_ls(A, b);
    CHECK(r.converged);
    const Eigen::VectorXd ref = brute_force(A, b);
    CHECK((r.x - ref).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(r.x.minCoeff() >= 0.0);
    CHECK(std::abs(r.x.sum() - 1.0) < 1e-14);
  }
}

TEST_CASE("recovers a sparse simplex point and honours warm starts") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = 40, m = 120;
  Eigen::MatrixXd A(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = u(rng);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  x(3) = 0.5;
  x(17) = 0.3;
  x(31) = 0.2;
  const Eigen::VectorXd b = A * x;
  const SimplexLsResult cold = simplex_ls(A, b);
  CHECK((cold.x - x).cwiseAbs().maxCoeff() < 1e-9);
  const SimplexLsResult warm = simplex_ls(A, b, {}, {3, 17, 31});
  CHECK((warm.x - x).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(warm.iterations <= cold.iterations);
  const SimplexLsResult wrong = simplex_ls(A, b, {}, {0, 1, 2});
  CHECK((wrong.x - x).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("simplex projection") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd v(7);
    for (int i = 0; i < 7; ++i) v(i) = g(rng);
    const Eigen::VectorXd p = project_to_simplex(v);
    CHECK(p.minCoeff() >= 0.0);
    CHECK(std::abs(p.sum() - 1.0) < 1e-12);
    // oracle: bisection on the threshold of max(v - t, 0)
    double lo = v.minCoeff() - 1.0, hi = v.maxCoeff();
    for (int it = 0; it < 200; ++it) {
      const double t = 0.5 * (lo + hi);
      ((v.array() - t).max(0.0).sum() > 1.0 ? lo : hi) = t;
    }
    const Eigen::VectorXd ref = (v.array() - 0.5 * (lo + hi)).max(0.0);
    CHECK((p - ref).cwiseAbs().maxCoeff() < 1e-12);
  }
}

}  // TEST_SUITE
