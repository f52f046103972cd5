#include <doctest.h>

#include <random>

#include "common.hpp"
#include "noon/harness.hpp"
#include "noon/metrics.hpp"
#include "noon/tomography.hpp"

using namespace noon;

namespace {

std::vector<CMat> as_blocks(const CMat& rho) {
  std::vector<CMat> b(9, CMat::Zero(rho.rows(), rho.cols()));
  b[0] = rho;
  return b;
}

std::vector<std::pair<int, int>> dims_of(const DisplacementGrid& g, int la, int lb) {
  std::vector<std::pair<int, int>> d;
  for (size_t i = 0; i < g.pairs.size(); ++i) {
    const double r = g.radii[g.radius_of_pair[i]];
    d.emplace_back(fit_dimension(la, r), fit_dimension(lb, r));
  }
  return d;
}

// Exact displaced populations as population fits, alpha rotated by phi.
std::vector<PopulationFit> exact_fits(const CMat& rho, int la, int lb, const DisplacementGrid& g,
                                      const std::vector<std::pair<int, int>>& dims, double phi = 0.0) {
  std::vector<PopulationFit> fits;
  const auto blocks = as_blocks(rho);
  for (size_t i = 0; i < g.pairs.size(); ++i) {
    const auto [a, b] = g.pairs[i];
    const auto [fa, fb] = dims[i];
    const Eigen::VectorXd p =
        displaced_populations(blocks, la, lb, -a * std::polar(1.0, phi), -b, fa, fb, 1.0)[0];
    PopulationFit f;
    f.P = Eigen::Map<const Eigen::MatrixXd>(p.data(), fb, fa).transpose();
    fits.push_back(f);
  }
  return fits;
}

CMat noon_rho(int N) {
  const CVec v = testing::noon_vector(N, N + 1);
  return v * v.adjoint();
}

const Eigen::Matrix3d kGround = [] {
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
  m(0, 0) = 1.0;
  return m;
}();

}  // namespace

TEST_SUITE("tomography") {

TEST_CASE("displacement grid") {
  const DisplacementGrid g = build_grid(1);
  CHECK(g.radii.front() == 0.0);
  CHECK(g.points.front() == 1);
  CHECK(g.pairs.front().first == cplx(0.0));
  CHECK(g.pairs.front().second == cplx(0.0));
  CHECK((g.points[1] == 5 || g.points[1] == 6));
  size_t expect = 1;
  for (size_t k = 1; k < g.points.size(); ++k) expect += g.points[k] * g.points[k];
  CHECK(g.pairs.size() == expect);
  CHECK(g.pairs.size() > 100);
  CHECK(g.pairs.size() < 1000);
  for (size_t i = 0; i < g.pairs.size(); ++i) {
    const double r = g.radii[g.radius_of_pair[i]];
    CHECK(std::abs(std::abs(g.pairs[i].first) - r) < 1e-12);
    CHECK(std::abs(std::abs(g.pairs[i].second) - r) < 1e-12);
  }
  CHECK(build_grid(3).pairs.size() > build_grid(2).pairs.size());
}

TEST_CASE("fit dimension keeps the displaced tail small") {
  for (int levels : {2, 3, 4})
    for (double r : {0.0, 0.2, 0.7, 1.3}) {
      const int F = fit_dimension(levels, r);
      CHECK(F >= levels);
      const CMat D = displacement_matrix(F + 12, r).leftCols(levels);
      for (int j = 0; j < levels; ++j) CHECK(D.col(j).tail(12).squaredNorm() <= 1e-4);
    }
}

TEST_CASE("population basis") {
  const DeviceModel d = testing::parked_device();
  TomographyOptions o;
  const ProbeModel probe(d, NoiseSpec::none(), o.tau_grid(), 4, 4);
  const PopulationBasis b = population_basis(probe, kGround, 4, 4);
  for (const auto& p : b.traces[0]) CHECK(std::abs(p[0] - 1.0) < 1e-12);

  std::vector<double> eg1, eg2;
  for (const auto& p : b.traces[1 * 4 + 0]) eg1.push_back(p[2]);
  for (const auto& p : b.traces[2 * 4 + 0]) eg2.push_back(p[2]);
  const double f1 = dominant_frequency(b.taus, eg1), f2 = dominant_frequency(b.taus, eg2);
  CHECK(f1 == doctest::Approx(17.8).epsilon(0.01));
  CHECK(f2 / f1 == doctest::Approx(std::sqrt(2.0)).epsilon(0.01));
}

TEST_CASE("population fits") {
  const DeviceModel d = testing::parked_device();
  TomographyOptions o;
  const ProbeModel probe(d, NoiseSpec::none(), o.tau_grid(), 6, 6);
  const PopulationBasis b = population_basis(probe, kGround, 6, 6);

  // synthesize and fit
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd p = Eigen::VectorXd::Zero(36);
  for (int k : {0, 1, 6, 7, 13, 20}) p(k) = u(rng);
  p /= p.sum();
  TraceSet t;
  t.tau = b.taus;
  for (size_t i = 0; i < t.tau.size(); ++i) {
    Joint j{0, 0, 0, 0};
    for (int k = 0; k < 36; ++k)
      for (int c = 0; c < 4; ++c) j[c] += p(k) * b.traces[k][i][c];
    t.probs.push_back(j);
  }
  const PopulationFit f = fit_populations(t, b);
  CHECK(f.converged);
  const Eigen::MatrixXd P = p.reshaped(6, 6).transpose();
  CHECK((f.P - P).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(f.P.minCoeff() >= 0.0);
  CHECK(std::abs(f.P.sum() - 1.0) < 1e-14);

  // undisplaced and displaced NOON traces
  const CMat rho = noon_rho(1);
  auto trace_of = [&](cplx a) {
    TraceSet s;
    s.tau = b.taus;
    s.probs = probe.joint(displaced_populations(as_blocks(rho), 2, 2, -a, -a, 6, 6));
    return fit_populations(s, b);
  };
  const PopulationFit f0 = trace_of(0.0);
  CHECK(f0.P(0, 1) + f0.P(1, 0) > 0.99);
  const PopulationFit f7 = trace_of(0.7);
  CHECK(f7.P.topLeftCorner(2, 2).sum() < 0.8);
  CHECK(f7.P.minCoeff() >= 0.0);
  CHECK(std::abs(f7.P.sum() - 1.0) < 1e-14);
}

TEST_CASE("linear inversion is exact on known states") {
  std::mt19937_64 rng(31);
  for (int N = 1; N <= 2; ++N) {
    const int l = N + 1;
    const DisplacementGrid g = build_grid(N);
    const auto dims = dims_of(g, l, l);
    const Reconstructor rec(g.pairs, dims, l, l);
    CHECK(rec.condition_number() < 20.0);
    for (const CMat& rho : {noon_rho(N), testing::random_density(l * l, rng)}) {
      const DensityMatrixEstimate e = rec.solve(exact_fits(rho, l, l, g, dims));
      CHECK(trace_distance(e.rho, rho) < 1e-9);
      CHECK(e.residual < 1e-9);
    }
  }
}

TEST_CASE("forward map agrees with displaced populations") {
  const DisplacementGrid g = build_grid(1);
  const auto dims = dims_of(g, 2, 2);
  const Reconstructor rec(g.pairs, dims, 2, 2);
  const CMat rho = noon_rho(1);
  const auto fits = exact_fits(rho, 2, 2, g, dims);
  for (size_t i = 0; i < g.pairs.size(); i += 17)
    CHECK((rec.predict(rho, i) - fits[i].P).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("physical projection never moves away from the truth") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> gauss;
  const CMat truth = noon_rho(1);
  for (int k = 0; k < 100; ++k) {
    CMat e(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) e(i, j) = cplx(gauss(rng), gauss(rng));
    e = 0.5 * (e + e.adjoint());
    e -= (e.trace() / 4.0) * CMat::Identity(4, 4);
    e *= 1e-3 / e.norm();
    const CMat noisy = truth + e;
    double clipped = 0.0, min_eig = 0.0;
    const CMat p = project_physical(noisy, &clipped, &min_eig);
    CHECK((p - truth).norm() <= (noisy - truth).norm() + 1e-15);
    CHECK(std::abs(p.trace() - 1.0) < 1e-12);
    CHECK(Eigen::SelfAdjointEigenSolver<CMat>(p).eigenvalues().minCoeff() > -1e-12);
  }
}

TEST_CASE("projection matches an alternating-projections oracle") {
  // Dykstra iterations between the PSD cone and the unit-trace plane
  auto dykstra = [](const CMat& x0) {
    const int d = static_cast<int>(x0.rows());
    CMat x = x0, p = CMat::Zero(d, d), q = CMat::Zero(d, d);
    for (int it = 0; it < 20000; ++it) {
      const CMat y0 = x + p;
      Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (y0 + y0.adjoint()));
      const CMat y = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() *
                     es.eigenvectors().adjoint();
      p = y0 - y;
      const CMat z0 = y + q;
      const CMat z = z0 + ((1.0 - z0.trace().real()) / d) * CMat::Identity(d, d);
      q = z0 - z;
      x = z;
    }
    return x;
  };
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss;
  for (const CMat& base : {noon_rho(1), CMat(CMat::Identity(4, 4) / 4.0)}) {
    for (int k = 0; k < 5; ++k) {
      CMat e(4, 4);
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) e(i, j) = cplx(gauss(rng), gauss(rng));
      e = 0.5 * (e + e.adjoint());
      const CMat noisy = base + 0.3 / e.norm() * e;
      const CMat fast = project_physical(noisy), slow = dykstra(noisy);
      CHECK(trace_distance(fast, slow) < 1e-3);
    }
  }
}

TEST_CASE("rotating the displacements rotates the coherence by N phi") {
  const double phi = 0.37;
  for (int N = 1; N <= 2; ++N) {
    const int l = N + 1;
    const DisplacementGrid g = build_grid(N);
    const auto dims = dims_of(g, l, l);
    const Reconstructor rec(g.pairs, dims, l, l);
    const CMat rho = noon_rho(N);
    const CMat turned = rec.solve(exact_fits(rho, l, l, g, dims, phi)).rho;
    // <0N| rho |N0>
    const cplx c0 = rho(N, N * l), c1 = turned(N, N * l);
    CHECK(std::abs(std::arg(c1 / c0) - N * phi) < 1e-6);
    CHECK(std::abs(c1) == doctest::Approx(0.5).epsilon(1e-9));
  }
}

TEST_CASE("pipeline round trip, sampling and bootstrap") {
  const DeviceModel d = testing::parked_device();
  TomographyOptions o;
  o.threads = 2;
  const TomographyPipeline pipe(d, NoiseSpec::none(), 2, 2, kGround, o);
  const CMat rho = noon_rho(1);
  const auto blocks = as_blocks(rho);

  const auto exact = pipe.simulate(blocks, 2, 2, ReadoutModel::ideal(), 0, 0);
  CHECK(exact.size() == pipe.grid().pairs.size());
  const DensityMatrixEstimate e = pipe.reconstruct(exact, ReadoutModel::ideal());
  CHECK(trace_distance(e.rho, rho) < 1e-3);
  CHECK(negativity(e.rho, 2, 2) == doctest::Approx(0.5).epsilon(0.01));
  for (const auto& f : pipe.fit(exact, ReadoutModel::ideal())) {
    CHECK(f.P.minCoeff() >= 0.0);
    CHECK(std::abs(f.P.sum() - 1.0) < 1e-12);
  }
  DensityMatrixEstimate copy = e;
  CHECK_THROWS_AS(pipe.bootstrap_errors(exact, ReadoutModel::ideal(), 3, 1, copy), Error);

  const ReadoutModel typ = ReadoutModel::typical();
  const auto sampled = pipe.simulate(blocks, 2, 2, typ, 2000, 5);
  const auto again = pipe.simulate(blocks, 2, 2, typ, 2000, 5);
  CHECK(sampled[10].probs == again[10].probs);
  DensityMatrixEstimate s = pipe.reconstruct(sampled, typ);
  CHECK(trace_distance(s.rho, rho) < 0.1);
  pipe.bootstrap_errors(sampled, typ, 3, 9, s);
  CHECK(s.error_re.maxCoeff() > 0.0);
  CHECK(s.error_re.maxCoeff() < 0.1);
  CHECK(s.error_im.allFinite());
}

TEST_CASE("bootstrap errors shrink with shots") {
  const DeviceModel d = testing::parked_device();
  TomographyOptions o;
  o.threads = 2;
  const TomographyPipeline pipe(d, NoiseSpec::none(), 2, 2, kGround, o);
  const auto blocks = as_blocks(noon_rho(1));
  const ReadoutModel ideal = ReadoutModel::ideal();
  auto median_error = [&](long shots) {
    const auto data = pipe.simulate(blocks, 2, 2, ideal, shots, 21);
    DensityMatrixEstimate e = pipe.reconstruct(data, ideal);
    pipe.bootstrap_errors(data, ideal, 16, 3, e);
    std::vector<double> v(e.error_re.data(), e.error_re.data() + e.error_re.size());
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return v[v.size() / 2];
  };
  const double e1 = median_error(1000), e2 = median_error(2000), e4 = median_error(1000000);
  CHECK(e1 / e2 == doctest::Approx(std::sqrt(2.0)).epsilon(0.3));
  CHECK(e4 < 0.01);
}

TEST_CASE("estimate json round trip") {
  DensityMatrixEstimate e;
  e.levels_A = e.levels_B = 2;
  std::mt19937_64 rng(1);
  e.rho = testing::random_density(4, rng);
  e.error_re = Eigen::MatrixXd::Constant(4, 4, 0.01);
  e.error_im = Eigen::MatrixXd::Constant(4, 4, 0.02);
  e.condition_number = 2.5;
  const DensityMatrixEstimate back = DensityMatrixEstimate::from_json(e.to_json());
  CHECK((back.rho - e.rho).norm() == 0.0);
  CHECK(back.error_im(3, 3) == 0.02);
  CHECK(back.condition_number == 2.5);
  CHECK(back.to_json() == e.to_json());
}

}  // TEST_SUITE
