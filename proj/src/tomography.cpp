#include "noon/tomography.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <json.hpp>
#include <unsupported/Eigen/KroneckerProduct>

#include "noon/parallel.hpp"

namespace noon {

std::vector<double> default_radii() { return {0.0, 0.2, 0.7, 0.9, 1.3}; }

int points_per_circle(int N, double r) {
  if (r <= 0.0) return 1;
  int n = static_cast<int>(std::lround(std::max(5.0, 2.0 * N + 6.0 * r)));
  n = std::min(n, 15);
  if (std::abs(r - 0.2) < 1e-12) n = std::clamp(n, 5, 6);
  if (std::abs(r - 1.3) < 1e-12) n = std::clamp(n, 9, 15);
  return n;
}

DisplacementGrid build_grid(int N, const std::vector<double>& radii) {
  if (N < 1) throw Error("build_grid: N must be >= 1");
  if (radii.empty()) throw Error("build_grid: no radii");
  DisplacementGrid g;
  g.radii = radii;
  for (size_t ri = 0; ri < radii.size(); ++ri) {
    const double r = radii[ri];
    if (r < 0.0) throw Error("build_grid: negative radius");
    const int n = points_per_circle(N, r);
    g.points.push_back(n);
    std::vector<cplx> circle;
    if (r == 0.0) {
      circle.push_back(0.0);
    } else {
      for (int l = 1; l <= n; ++l)
        circle.push_back(std::polar(r, 2.0 * std::numbers::pi * l / n));
    }
    for (cplx a : circle)
      for (cplx b : circle) {
        g.pairs.emplace_back(a, b);
        g.radius_of_pair.push_back(static_cast<int>(ri));
      }
  }
  return g;
}

int fit_dimension(int levels, double r, double tail) {
  if (levels < 1) throw Error("fit_dimension: levels must be >= 1");
  const int top = levels + 40;
  const CMat d = displacement_matrix(top, cplx(r, 0.0), 10);
  for (int F = levels; F <= top; ++F) {
    bool ok = true;
    for (int j = 0; j < levels && ok; ++j)
      ok = 1.0 - d.col(j).head(F).squaredNorm() <= tail;
    if (ok) return F;
  }
  throw TruncationError("fit_dimension: no truncation meets the tail tolerance");
}

PopulationBasis population_basis(const ProbeModel& probe, const Eigen::Matrix3d& qubit_pops,
                                 int fit_A, int fit_B) {
  if (fit_A > probe.photons(0) || fit_B > probe.photons(1))
    throw TruncationError("population_basis: fit dimension exceeds probe truncation");
  PopulationBasis b;
  b.fit_A = fit_A;
  b.fit_B = fit_B;
  b.taus = probe.taus();
  for (int m = 0; m < fit_A; ++m)
    for (int n = 0; n < fit_B; ++n) b.traces.push_back(probe.fock_trace(qubit_pops, m, n));
  return b;
}

PopulationBasis population_basis(const DeviceModel& device, const NoiseSpec& noise,
                                 const Eigen::Matrix3d& qubit_pops, int fit_A, int fit_B,
                                 const std::vector<double>& taus) {
  const ProbeModel probe(device, noise, taus, fit_A, fit_B);
  return population_basis(probe, qubit_pops, fit_A, fit_B);
}

std::vector<int> support_of(const PopulationFit& fit) {
  std::vector<int> out;
  for (int m = 0; m < fit.P.rows(); ++m)
    for (int n = 0; n < fit.P.cols(); ++n)
      if (fit.P(m, n) > 0.0) out.push_back(m * static_cast<int>(fit.P.cols()) + n);
  return out;
}

PopulationFit fit_populations(const TraceSet& measured, const PopulationBasis& basis,
                              const SimplexLsOptions& opts, const std::vector<int>& warm) {
  if (measured.tau.size() != basis.taus.size())
    throw Error("fit_populations: tau grids differ");
  for (size_t t = 0; t < basis.taus.size(); ++t)
    if (std::abs(measured.tau[t] - basis.taus[t]) > 1e-9)
      throw Error("fit_populations: tau grids differ");
  const int nt = static_cast<int>(basis.taus.size());
  const int nv = basis.fit_A * basis.fit_B;
  Eigen::MatrixXd A(4 * nt, nv);
  Eigen::VectorXd y(4 * nt);
  for (int t = 0; t < nt; ++t)
    for (int k = 0; k < 4; ++k) {
      double w = 1.0;
      if (!measured.exact()) {
        const double p = measured.probs[t][k];
        const double n = static_cast<double>(measured.shots);
        const double var = std::max(p * (1.0 - p), 1.0 / n) / n;
        w = 1.0 / std::sqrt(var);
      }
      y(4 * t + k) = w * measured.probs[t][k];
      for (int v = 0; v < nv; ++v) A(4 * t + k, v) = w * basis.traces[v][t][k];
    }
  const SimplexLsResult r = simplex_ls(A, y, opts, warm);
  PopulationFit fit;
  fit.P = Eigen::Map<const Eigen::MatrixXd>(r.x.data(), basis.fit_B, basis.fit_A).transpose();
  fit.residual = r.residual;
  fit.kkt = r.kkt;
  fit.iterations = r.iterations;
  fit.converged = r.converged;
  return fit;
}

namespace {

using nlohmann::json;

json complex_matrix(const CMat& m) {
  json out = json::array();
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) out.push_back({m(i, j).real(), m(i, j).imag()});
  return out;
}

json real_matrix(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  return out;
}

}  // namespace

std::string DensityMatrixEstimate::to_json() const {
  json j;
  j["dims"] = {levels_A, levels_B};
  j["basis"] = "photon index m*levels_B + n (A first)";
  j["rho"] = complex_matrix(rho);
  j["error_re"] = real_matrix(error_re);
  j["error_im"] = real_matrix(error_im);
  j["diagnostics"] = {{"residual", residual},
                      {"condition_number", condition_number},
                      {"clipped_mass", clipped_mass},
                      {"min_raw_eigenvalue", min_raw_eigenvalue}};
  return j.dump(2);
}

DensityMatrixEstimate DensityMatrixEstimate::from_json(const std::string& text) {
  const json j = json::parse(text);
  DensityMatrixEstimate e;
  e.levels_A = j.at("dims").at(0);
  e.levels_B = j.at("dims").at(1);
  const int d = e.levels_A * e.levels_B;
  e.rho = CMat::Zero(d, d);
  e.error_re = Eigen::MatrixXd::Zero(d, d);
  e.error_im = Eigen::MatrixXd::Zero(d, d);
  const auto& r = j.at("rho");
  if (static_cast<int>(r.size()) != d * d) throw Error("density matrix JSON: wrong size");
  for (int k = 0; k < d * d; ++k) {
    e.rho(k / d, k % d) = cplx(r[k][0].get<double>(), r[k][1].get<double>());
    if (j.contains("error_re") && j["error_re"].size() == r.size()) {
      e.error_re(k / d, k % d) = j["error_re"][k];
      e.error_im(k / d, k % d) = j["error_im"][k];
    }
  }
  const auto& g = j.at("diagnostics");
  e.residual = g.at("residual");
  e.condition_number = g.at("condition_number");
  e.clipped_mass = g.at("clipped_mass");
  e.min_raw_eigenvalue = g.at("min_raw_eigenvalue");
  return e;
}

Reconstructor::Reconstructor(std::vector<std::pair<cplx, cplx>> pairs,
                             std::vector<std::pair<int, int>> fit_dims, int levels_A,
                             int levels_B)
    : pairs_(std::move(pairs)), dims_(std::move(fit_dims)), la_(levels_A), lb_(levels_B) {
  if (pairs_.size() != dims_.size()) throw Error("reconstruct: pair and dimension counts differ");
  const int d = la_ * lb_;
  const int np = d * d;
  for (size_t i = 0; i < pairs_.size(); ++i) {
    const auto [fa, fb] = dims_[i];
    if (fa < la_ || fb < lb_) throw TruncationError("reconstruct: fit dimension below state size");
    KA_.push_back(displacement_matrix(fa + 10, -pairs_[i].first).topLeftCorner(fa, la_));
    KB_.push_back(displacement_matrix(fb + 10, -pairs_[i].second).topLeftCorner(fb, lb_));
  }
  gram_ = Eigen::MatrixXd::Zero(np, np);
  Eigen::MatrixXd rows;
  for (size_t i = 0; i < pairs_.size(); ++i) {
    rows_for(i, rows);
    gram_.selfadjointView<Eigen::Lower>().rankUpdate(rows.transpose());
  }
  gram_.triangularView<Eigen::StrictlyUpper>() = gram_.transpose();
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(
                                 gram_, Eigen::EigenvaluesOnly)
                                 .eigenvalues();
  condition_ = ev.minCoeff() > 0.0 ? std::sqrt(ev.maxCoeff() / ev.minCoeff())
                                   : std::numeric_limits<double>::infinity();
  if (!(condition_ < 1e8))
    throw Error("reconstruct: displacement grid is insufficient (condition number " +
                std::to_string(condition_) + ")");
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(np + 1, np + 1);
  kkt.topLeftCorner(np, np) = gram_;
  for (int j = 0; j < d; ++j) kkt(np, j) = kkt(j, np) = 1.0;
  kkt_.compute(kkt);
}

// Parameters: d real diagonal entries, then (re, im) of rho(j, k) for j < k.
void Reconstructor::rows_for(std::size_t i, Eigen::MatrixXd& rows) const {
  const auto [fa, fb] = dims_[i];
  const int d = la_ * lb_;
  rows.resize(fa * fb, d * d);
  CVec K(d);
  for (int m = 0; m < fa; ++m)
    for (int n = 0; n < fb; ++n) {
      for (int j = 0; j < la_; ++j)
        for (int k = 0; k < lb_; ++k) K(j * lb_ + k) = KA_[i](m, j) * KB_[i](n, k);
      const int u = m * fb + n;
      int p = d;
      for (int j = 0; j < d; ++j) {
        rows(u, j) = std::norm(K(j));
        for (int k = j + 1; k < d; ++k) {
          const cplx c = K(j) * std::conj(K(k));
          rows(u, p++) = 2.0 * c.real();
          rows(u, p++) = -2.0 * c.imag();
        }
      }
    }
}

CMat Reconstructor::unpack(const Eigen::VectorXd& x) const {
  const int d = la_ * lb_;
  CMat rho = CMat::Zero(d, d);
  int p = d;
  for (int j = 0; j < d; ++j) {
    rho(j, j) = x(j);
    for (int k = j + 1; k < d; ++k) {
      rho(j, k) = cplx(x(p), x(p + 1));
      rho(k, j) = std::conj(rho(j, k));
      p += 2;
    }
  }
  return rho;
}

Eigen::MatrixXd Reconstructor::predict(const CMat& rho, std::size_t i) const {
  const CMat K = Eigen::kroneckerProduct(KA_[i], KB_[i]).eval();
  const Eigen::VectorXd pops = (K * rho).cwiseProduct(K.conjugate()).rowwise().sum().real();
  return Eigen::Map<const Eigen::MatrixXd>(pops.data(), dims_[i].second, dims_[i].first)
      .transpose();
}

DensityMatrixEstimate Reconstructor::solve(const std::vector<PopulationFit>& fits) const {
  if (fits.size() != pairs_.size()) throw Error("reconstruct: one fit per grid pair required");
  const int d = la_ * lb_;
  const int np = d * d;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(np + 1);
  rhs(np) = 1.0;
  Eigen::MatrixXd rows;
  std::vector<Eigen::VectorXd> ys(fits.size());
  for (size_t i = 0; i < fits.size(); ++i) {
    const auto [fa, fb] = dims_[i];
    if (fits[i].P.rows() != fa || fits[i].P.cols() != fb)
      throw Error("reconstruct: fit dimension does not match the grid");
    const Eigen::MatrixXd Pt = fits[i].P.transpose();
    ys[i] = Eigen::Map<const Eigen::VectorXd>(Pt.data(), fa * fb);
    rows_for(i, rows);
    rhs.head(np) += rows.transpose() * ys[i];
  }
  const Eigen::VectorXd sol = kkt_.solve(rhs);
  const Eigen::VectorXd x = sol.head(np);
  double res2 = 0.0;
  for (size_t i = 0; i < fits.size(); ++i) {
    rows_for(i, rows);
    res2 += (rows * x - ys[i]).squaredNorm();
  }
  DensityMatrixEstimate est;
  est.levels_A = la_;
  est.levels_B = lb_;
  est.residual = std::sqrt(res2);
  est.condition_number = condition_;
  est.rho = project_physical(unpack(x), &est.clipped_mass, &est.min_raw_eigenvalue);
  est.error_re = Eigen::MatrixXd::Zero(d, d);
  est.error_im = Eigen::MatrixXd::Zero(d, d);
  return est;
}

CMat project_physical(const CMat& rho, double* clipped, double* min_eig) {
  const CMat h = 0.5 * (rho + rho.adjoint());
  Eigen::SelfAdjointEigenSolver<CMat> es(h);
  const Eigen::VectorXd raw = es.eigenvalues();
  if (min_eig) *min_eig = raw.minCoeff();
  if (clipped) *clipped = (-raw.array()).max(0.0).sum();
  // nearest point in Frobenius norm: the spectrum goes onto the simplex
  const Eigen::VectorXd ev = project_to_simplex(raw);
  CMat out = es.eigenvectors() * ev.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
  return 0.5 * (out + out.adjoint());
}

std::vector<double> TomographyOptions::tau_grid() const {
  if (!taus.empty()) return taus;
  std::vector<double> t;
  for (int i = 0; i <= 150; ++i) t.push_back(2.0 * i);
  return t;
}

namespace {

std::vector<std::pair<int, int>> pair_dims(const DisplacementGrid& g, int la, int lb,
                                           double tail) {
  std::vector<std::pair<int, int>> per_radius;
  for (double r : g.radii) per_radius.emplace_back(fit_dimension(la, r, tail), fit_dimension(lb, r, tail));
  std::vector<std::pair<int, int>> out;
  for (int ri : g.radius_of_pair) out.push_back(per_radius[ri]);
  return out;
}

int max_dim(const std::vector<std::pair<int, int>>& dims, bool second) {
  int m = 0;
  for (const auto& d : dims) m = std::max(m, second ? d.second : d.first);
  return m;
}

}  // namespace

ProbeModel TomographyPipeline::make_probe(const DeviceModel& device,
                                          const NoiseSpec& probe_noise, int levels_A,
                                          int levels_B, const TomographyOptions& opts) {
  const DisplacementGrid g = build_grid(std::max(levels_A, levels_B) - 1,
                                        opts.radii.empty() ? default_radii() : opts.radii);
  const auto dims = pair_dims(g, levels_A, levels_B, opts.tail_tolerance);
  return ProbeModel(device, probe_noise, opts.tau_grid(), max_dim(dims, false) + opts.extra_photons,
                    max_dim(dims, true) + opts.extra_photons, true);
}

TomographyPipeline::TomographyPipeline(const DeviceModel& device, const NoiseSpec& probe_noise,
                                       int levels_A, int levels_B,
                                       const Eigen::Matrix3d& qubit_pops,
                                       const TomographyOptions& opts)
    : TomographyPipeline(make_probe(device, probe_noise, levels_A, levels_B, opts), levels_A,
                         levels_B, qubit_pops, opts) {}

TomographyPipeline::TomographyPipeline(ProbeModel probe, int levels_A, int levels_B,
                                       const Eigen::Matrix3d& qubit_pops,
                                       const TomographyOptions& opts)
    : grid_(build_grid(std::max(levels_A, levels_B) - 1,
                       opts.radii.empty() ? default_radii() : opts.radii)),
      taus_(opts.tau_grid()),
      la_(levels_A),
      lb_(levels_B),
      opts_(opts),
      dims_(pair_dims(grid_, la_, lb_, opts.tail_tolerance)),
      probe_(std::move(probe)),
      recon_(grid_.pairs, dims_, la_, lb_) {
  if (probe_.taus() != taus_) throw Error("tomography: probe model uses another tau grid");
  if (probe_.photons(0) < max_dim(dims_, false) || probe_.photons(1) < max_dim(dims_, true))
    throw TruncationError("tomography: probe model truncation below the fit dimension");
  set_qubit_populations(qubit_pops);
}

void TomographyPipeline::set_qubit_populations(const Eigen::Matrix3d& qubit_pops) {
  bases_.clear();
  for (size_t ri = 0; ri < grid_.radii.size(); ++ri) {
    size_t i = 0;
    while (grid_.radius_of_pair[i] != static_cast<int>(ri)) ++i;
    bases_.push_back(population_basis(probe_, qubit_pops, dims_[i].first, dims_[i].second));
  }
}

std::vector<TraceSet> TomographyPipeline::simulate(const std::vector<CMat>& blocks,
                                                   int state_levels_A, int state_levels_B,
                                                   const ReadoutModel& readout, long shots,
                                                   std::uint64_t seed,
                                                   double phase_offset) const {
  const size_t n = grid_.pairs.size();
  std::vector<TraceSet> out(n);
  const cplx rot = std::polar(1.0, phase_offset);
  parallel_for(n, opts_.threads, [&](size_t i) {
    const auto [alpha, beta] = grid_.pairs[i];
    const auto pops = displaced_populations(blocks, state_levels_A, state_levels_B, -alpha * rot,
                                            -beta, probe_.photons(0), probe_.photons(1));
    TraceSet tr;
    tr.tau = taus_;
    tr.alpha = alpha;
    tr.beta = beta;
    for (Joint p : probe_.joint(pops)) {
      const double s = p[0] + p[1] + p[2] + p[3];
      for (double& v : p) v = std::max(0.0, v / s);
      tr.probs.push_back(p);
    }
    tr = apply_readout(tr, readout);
    if (shots > 0) tr = sample_trace(tr, shots, derive_seed(seed, i));
    out[i] = std::move(tr);
  });
  return out;
}

std::vector<PopulationFit> TomographyPipeline::fit(const std::vector<TraceSet>& traces,
                                                   const ReadoutModel& readout) const {
  if (traces.size() != grid_.pairs.size())
    throw Error("tomography: one trace per grid pair required");
  std::vector<PopulationFit> fits(traces.size());
  // The first pair of each circle is fitted cold; the rest start from its
  // support, which keeps the result independent of scheduling.
  std::vector<size_t> first(grid_.radii.size(), traces.size());
  for (size_t i = traces.size(); i-- > 0;) first[grid_.radius_of_pair[i]] = i;
  auto run = [&](size_t i, const std::vector<int>& warm) {
    const TraceSet corrected = correct_readout(traces[i], readout);
    fits[i] = fit_populations(corrected, bases_[grid_.radius_of_pair[i]], opts_.fit, warm);
  };
  parallel_for(first.size(), opts_.threads, [&](size_t r) { run(first[r], {}); });
  std::vector<std::vector<int>> warm(first.size());
  for (size_t r = 0; r < first.size(); ++r) warm[r] = support_of(fits[first[r]]);
  parallel_for(traces.size(), opts_.threads, [&](size_t i) {
    const int r = grid_.radius_of_pair[i];
    if (i != first[r]) run(i, warm[r]);
  });
  return fits;
}

DensityMatrixEstimate TomographyPipeline::reconstruct(const std::vector<TraceSet>& traces,
                                                      const ReadoutModel& readout) const {
  return recon_.solve(fit(traces, readout));
}

void TomographyPipeline::bootstrap_errors(const std::vector<TraceSet>& traces,
                                          const ReadoutModel& readout, int resamples,
                                          std::uint64_t seed,
                                          DensityMatrixEstimate& est) const {
  if (resamples < 2) throw Error("bootstrap: need at least 2 resamples");
  for (const auto& t : traces)
    if (t.exact()) throw Error("bootstrap: exact-mode traces carry no sampling noise");
  const int d = la_ * lb_;
  std::vector<CMat> rhos(resamples);
  for (int b = 0; b < resamples; ++b) {
    const std::uint64_t sb = derive_seed(seed, static_cast<std::uint64_t>(b));
    std::vector<TraceSet> re(traces.size());
    parallel_for(traces.size(), opts_.threads, [&](size_t i) {
      TraceSet base = traces[i];
      base.shots = 0;
      base.counts.clear();
      re[i] = sample_trace(base, traces[i].shots, derive_seed(sb, i));
    });
    rhos[b] = reconstruct(re, readout).rho;
  }
  CMat mean = CMat::Zero(d, d);
  for (const auto& r : rhos) mean += r;
  mean /= static_cast<double>(resamples);
  est.error_re = Eigen::MatrixXd::Zero(d, d);
  est.error_im = Eigen::MatrixXd::Zero(d, d);
  for (const auto& r : rhos) {
    const CMat dev = r - mean;
    est.error_re += dev.real().cwiseAbs2();
    est.error_im += dev.imag().cwiseAbs2();
  }
  est.error_re = (est.error_re / (resamples - 1)).cwiseSqrt();
  est.error_im = (est.error_im / (resamples - 1)).cwiseSqrt();
}

}  // namespace noon
