#include "noon/nnls.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace noon {

namespace {

// Least squares over the affine set sum x_P = 1, with x fixed to 0 off P.
Eigen::VectorXd solve_on(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                         const std::vector<int>& P) {
  const int k = static_cast<int>(P.size());
  Eigen::VectorXd z = Eigen::VectorXd::Zero(A.cols());
  const Eigen::VectorXd last = A.col(P.back());
  if (k == 1) {
    z(P[0]) = 1.0;
    return z;
  }
  Eigen::MatrixXd M(A.rows(), k - 1);
  for (int j = 0; j < k - 1; ++j) M.col(j) = A.col(P[j]) - last;
  const Eigen::VectorXd y = M.completeOrthogonalDecomposition().solve(b - last);
  for (int j = 0; j < k - 1; ++j) z(P[j]) = y(j);
  z(P.back()) = 1.0 - y.sum();
  return z;
}

// Moves x (feasible, support P) to the least-squares point on P, dropping
// variables that hit zero on the way.  Returns false if P collapsed.
bool settle(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, std::vector<int>& P,
            std::vector<char>& in, Eigen::VectorXd& x, int best) {
  const int n = static_cast<int>(A.cols());
  for (int inner = 0; inner < n + 1; ++inner) {
    Eigen::VectorXd z = solve_on(A, b, P);
    bool feasible = true;
    for (int j : P)
      if (z(j) <= 0.0) feasible = false;
    if (feasible) {
      x = z;
      return true;
    }
    double step = 1.0;
    for (int j : P)
      if (z(j) <= 0.0) step = std::min(step, x(j) / (x(j) - z(j)));
    x += step * (z - x);
    std::vector<int> keep;
    for (int j : P) {
      if (x(j) <= 1e-15 || (z(j) <= 0.0 && x(j) <= 1e-12)) {
        x(j) = 0.0;
        in[j] = 0;
      } else {
        keep.push_back(j);
      }
    }
    P.swap(keep);
    if (P.empty()) {
      // numerical corner: fall back to the best vertex
      P.push_back(best);
      in[best] = 1;
      x.setZero();
      x(best) = 1.0;
      return false;
    }
    x /= x.sum();
  }
  return false;
}

}  // namespace

SimplexLsResult simplex_ls(const Eigen::MatrixXd& A_in, const Eigen::VectorXd& b_in,
                           const SimplexLsOptions& opts, const std::vector<int>& warm) {
  const int n = static_cast<int>(A_in.cols());
  // Tall problems are reduced to their triangular factor first; the residual
  // differs from the original by a constant.
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  double offset2 = 0.0;
  if (A_in.rows() > 2 * n) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(A_in);
    const Eigen::VectorXd qtb = qr.householderQ().adjoint() * b_in;
    A = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
    b = qtb.head(n);
    offset2 = qtb.tail(qtb.size() - n).squaredNorm();
  } else {
    A = A_in;
    b = b_in;
  }
  SimplexLsResult res;
  res.x = Eigen::VectorXd::Zero(n);
  if (n == 0) return res;
  const double scale = std::max(1.0, A.colwise().squaredNorm().maxCoeff());

  // start at the best vertex
  int best = 0;
  double best_r = (A.col(0) - b).squaredNorm();
  for (int j = 1; j < n; ++j) {
    const double r = (A.col(j) - b).squaredNorm();
    if (r < best_r) best_r = r, best = j;
  }
  std::vector<int> P{best};
  std::vector<char> in(n, 0);
  in[best] = 1;
  res.x(best) = 1.0;
  if (!warm.empty()) {
    P.clear();
    in.assign(n, 0);
    res.x.setZero();
    for (int j : warm)
      if (j >= 0 && j < n && !in[j]) P.push_back(j), in[j] = 1;
    if (P.empty()) P.push_back(best), in[best] = 1;
    for (int j : P) res.x(j) = 1.0 / static_cast<double>(P.size());
    settle(A, b, P, in, res.x, best);
  }

  auto multipliers = [&](const Eigen::VectorXd& x, double& mu) {
    const Eigen::VectorXd g = A.transpose() * (A * x - b);
    mu = 0.0;
    for (int j : P) mu += g(j);
    mu /= static_cast<double>(P.size());
    return Eigen::VectorXd(g.array() - mu);
  };

  for (res.iterations = 0; res.iterations < opts.max_iterations; ++res.iterations) {
    double mu;
    const Eigen::VectorXd w = multipliers(res.x, mu);
    int add = -1;
    double most = -1e-14 * scale;
    for (int j = 0; j < n; ++j)
      if (!in[j] && w(j) < most) most = w(j), add = j;
    if (add < 0) {
      res.converged = true;
      break;
    }
    P.push_back(add);
    in[add] = 1;
    const bool progressed = settle(A, b, P, in, res.x, best);
    if (!progressed && P.size() == 1 && P[0] == best && res.iterations > n) break;
  }

  res.x = res.x.cwiseMax(0.0);
  res.x /= res.x.sum();
  double mu;
  const Eigen::VectorXd w = multipliers(res.x, mu);
  double kkt = 0.0;
  for (int j = 0; j < n; ++j)
    kkt = std::max(kkt, in[j] ? std::abs(w(j)) : std::max(0.0, -w(j)));
  res.kkt = kkt / scale;
  res.converged = res.converged && res.kkt < opts.kkt_tolerance;
  res.residual = std::sqrt((A * res.x - b).squaredNorm() + offset2);
  return res;
}

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
  const int n = static_cast<int>(v.size());
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (int i = 0; i < n; ++i) {
    cum += u[i];
    const double t = (cum - 1.0) / (i + 1);
    if (u[i] - t > 0.0) theta = t;
  }
  return (v.array() - theta).max(0.0).matrix();
}

}  // namespace noon
