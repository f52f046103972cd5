#include "noon/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <unsupported/Eigen/LevenbergMarquardt>

namespace noon {

double fidelity(const CMat& rho, const CVec& psi) {
  if (rho.rows() != rho.cols() || rho.rows() != psi.size())
    throw Error("fidelity: dimension mismatch (" + std::to_string(rho.rows()) + " vs " +
                std::to_string(psi.size()) + ")");
  const double f = (psi.adjoint() * rho * psi)(0, 0).real() / psi.squaredNorm();
  return std::clamp(f, 0.0, 1.0);
}

double negativity(const CMat& rho, int levels_A, int levels_B) {
  if (rho.rows() != levels_A * levels_B || rho.cols() != rho.rows())
    throw Error("negativity: dimension mismatch");
  if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-8)
    throw Error("negativity: input is not Hermitian");
  const CMat pt = partial_transpose_matrix(0.5 * (rho + rho.adjoint()), levels_A, levels_B, true);
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<CMat>(pt, Eigen::EigenvaluesOnly).eigenvalues();
  double s = 0.0;
  // eigenvalues within rounding of zero do not count
  for (int i = 0; i < ev.size(); ++i)
    if (ev(i) < -1e-12) s -= ev(i);
  return s;
}

double concurrence(const Eigen::Matrix4cd& rho) {
  Eigen::Matrix4cd yy = Eigen::Matrix4cd::Zero();
  yy(0, 3) = -1.0;
  yy(1, 2) = 1.0;
  yy(2, 1) = 1.0;
  yy(3, 0) = -1.0;
  const Eigen::Matrix4cd tilde = yy * rho.conjugate() * yy;
  const Eigen::Vector4cd ev = Eigen::ComplexEigenSolver<Eigen::Matrix4cd>(rho * tilde, false).eigenvalues();
  std::array<double, 4> l;
  for (int i = 0; i < 4; ++i) l[i] = std::sqrt(std::max(0.0, ev(i).real()));
  std::sort(l.begin(), l.end(), std::greater<>());
  return std::max(0.0, l[0] - l[1] - l[2] - l[3]);
}

EofResult eof_effective(const CMat& rho, int levels_A, int levels_B, int M, int N) {
  if (rho.rows() != levels_A * levels_B) throw Error("eof_effective: dimension mismatch");
  if (M < 1 || N < 1 || M >= levels_A || N >= levels_B)
    throw Error("eof_effective: photon numbers outside the matrix");
  const int idx[4] = {0 * levels_B + 0, 0 * levels_B + N, M * levels_B + 0, M * levels_B + N};
  Eigen::Matrix4cd block;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) block(i, j) = rho(idx[i], idx[j]);
  EofResult r;
  r.weight = block.trace().real();
  r.reliable = r.weight >= 0.1;
  if (r.weight <= 0.0) return r;
  block /= r.weight;
  r.concurrence = concurrence(block);
  const double x = 0.5 * (1.0 + std::sqrt(std::max(0.0, 1.0 - r.concurrence * r.concurrence)));
  auto h = [](double p) { return p <= 0.0 || p >= 1.0 ? 0.0 : -p * std::log2(p) - (1 - p) * std::log2(1 - p); };
  r.eof = h(x);
  return r;
}

namespace {

struct ExpFunctor : Eigen::DenseFunctor<double> {
  const std::vector<double>& t;
  const std::vector<double>& y;
  ExpFunctor(const std::vector<double>& t_, const std::vector<double>& y_)
      : DenseFunctor<double>(2, static_cast<int>(t_.size())), t(t_), y(y_) {}
  // x = (amplitude, rate)
  int operator()(const InputType& x, ValueType& f) const {
    for (size_t i = 0; i < t.size(); ++i) f(i) = x(0) * std::exp(-x(1) * t[i]) - y[i];
    return 0;
  }
  int df(const InputType& x, JacobianType& J) const {
    for (size_t i = 0; i < t.size(); ++i) {
      const double e = std::exp(-x(1) * t[i]);
      J(i, 0) = e;
      J(i, 1) = -x(0) * t[i] * e;
    }
    return 0;
  }
};

}  // namespace

DecayFit decay_fit(const std::vector<std::pair<double, cplx>>& series,
                   const std::string& element) {
  if (series.size() < 4) throw Error("decay_fit: need at least 4 points");
  std::vector<double> t, y;
  for (const auto& [x, v] : series) {
    t.push_back(x);
    y.push_back(std::abs(v));
  }
  // log-linear start
  double st = 0, sy = 0, stt = 0, sty = 0;
  int n = 0;
  for (size_t i = 0; i < t.size(); ++i) {
    if (y[i] <= 0.0) continue;
    const double ly = std::log(y[i]);
    st += t[i];
    sy += ly;
    stt += t[i] * t[i];
    sty += t[i] * ly;
    ++n;
  }
  Eigen::VectorXd x(2);
  if (n >= 2 && n * stt - st * st > 0.0) {
    const double slope = (n * sty - st * sy) / (n * stt - st * st);
    x << std::exp((sy - slope * st) / n), -slope;
  } else {
    x << *std::max_element(y.begin(), y.end()), 1.0 / (t.back() - t.front() + 1.0);
  }
  ExpFunctor f(t, y);
  Eigen::LevenbergMarquardt<ExpFunctor> lm(f);
  lm.setXtol(1e-14);
  lm.setFtol(1e-14);
  lm.minimize(x);
  if (!(x(1) > 0.0)) throw Error("decay_fit: fitted decay time is not positive");
  DecayFit out;
  out.amplitude = x(0);
  out.tau_D = 1.0 / x(1);
  Eigen::VectorXd r(t.size());
  f(x, r);
  out.residual = r.norm();
  out.element = element;
  return out;
}

PhaseFit phase_fit(const std::vector<std::pair<double, cplx>>& series) {
  if (series.size() < 3) throw Error("phase_fit: need at least 3 points");
  PhaseFit out;
  double prev = 0.0;
  for (size_t i = 0; i < series.size(); ++i) {
    double p = std::arg(series[i].second);
    if (i > 0) {
      double step = std::remainder(p - prev, 2.0 * std::numbers::pi);
      if (std::abs(step) > std::numbers::pi / 2) out.ambiguous = true;
      p = out.unwrapped.back() + step;
    }
    prev = std::arg(series[i].second);
    out.unwrapped.push_back(p);
  }
  const double n = static_cast<double>(series.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < series.size(); ++i) {
    const double xv = series[i].first, yv = out.unwrapped[i];
    sx += xv;
    sy += yv;
    sxx += xv * xv;
    sxy += xv * yv;
  }
  const double den = n * sxx - sx * sx;
  if (den <= 0.0) throw Error("phase_fit: x values are degenerate");
  out.slope = (n * sxy - sx * sy) / den;
  out.intercept = (sy - out.slope * sx) / n;
  double r2 = 0.0;
  for (size_t i = 0; i < series.size(); ++i) {
    const double d = out.unwrapped[i] - (out.intercept + out.slope * series[i].first);
    r2 += d * d;
  }
  out.residual = std::sqrt(r2);
  return out;
}

nlohmann::json metric_record(const std::string& metric, double value, double error,
                             nlohmann::json diagnostics) {
  return {{"metric", metric}, {"value", value}, {"error", error}, {"diagnostics", std::move(diagnostics)}};
}

}  // namespace noon
