#include <doctest.h>

#include <random>

#include "common.hpp"
#include "noon/dynamics.hpp"
#include "noon/metrics.hpp"

using namespace noon;
using testing::kron;

TEST_SUITE("metrics") {

TEST_CASE("fidelity") {
  const CVec v = testing::noon_vector(1, 2);
  CHECK(fidelity(v * v.adjoint(), v) == doctest::Approx(1.0));
  CHECK(fidelity(CMat::Identity(4, 4) / 4.0, v) == doctest::Approx(0.25));
  CHECK_THROWS_AS(fidelity(CMat::Identity(3, 3), v), Error);

  std::mt19937_64 rng(6);
  for (int k = 0; k < 10; ++k) {
    const CMat rho = testing::random_density(6, rng);
    const CVec psi = testing::random_pure(6, rng);
    const CMat U = testing::random_unitary(6, rng);
    CHECK(std::abs(fidelity(rho, psi) - fidelity(U * rho * U.adjoint(), U * psi)) < 1e-12);
  }
}

TEST_CASE("negativity") {
  for (int N = 1; N <= 3; ++N) {
    const CVec v = testing::noon_vector(N, N + 1);
    CHECK(negativity(v * v.adjoint(), N + 1, N + 1) == doctest::Approx(0.5).epsilon(1e-12));
  }
  std::mt19937_64 rng(10);
  for (int k = 0; k < 20; ++k) {
    const CMat prod = kron(testing::random_density(3, rng), testing::random_density(2, rng));
    CHECK(negativity(prod, 3, 2) == 0.0);

    const CMat rho = testing::random_density(6, rng);
    const CVec e = testing::random_pure(6, rng);
    const CMat ent = 0.4 * rho + 0.6 * e * e.adjoint();
    const CMat U = kron(testing::random_unitary(3, rng), testing::random_unitary(2, rng));
    CHECK(std::abs(negativity(ent, 3, 2) - negativity(U * ent * U.adjoint(), 3, 2)) < 1e-9);
  }
  CMat bad = CMat::Identity(4, 4) / 4.0;
  bad(0, 1) = 0.1;
  CHECK_THROWS_AS(negativity(bad, 2, 2), Error);
}

TEST_CASE("concurrence and entanglement of formation") {
  const CVec bell = testing::noon_vector(1, 2);
  CHECK(concurrence(bell * bell.adjoint()) == doctest::Approx(1.0));
  // Werner states: C = max(0, (3p - 1) / 2)
  for (double p : {0.2, 0.5, 0.8}) {
    const Eigen::Matrix4cd w = p * bell * bell.adjoint() + (1 - p) / 4.0 * Eigen::Matrix4cd::Identity();
    CHECK(concurrence(w) == doctest::Approx(std::max(0.0, (3 * p - 1) / 2)).epsilon(1e-9));
  }
  const EofResult full = eof_effective(bell * bell.adjoint(), 2, 2, 1, 1);
  CHECK(full.eof == doctest::Approx(1.0));
  CHECK(full.weight == doctest::Approx(1.0));

  // PPT on the projected block implies zero EOF
  std::mt19937_64 rng(12);
  for (int k = 0; k < 20; ++k) {
    const CMat r = kron(testing::random_density(3, rng), testing::random_density(2, rng));
    CHECK(negativity(r, 3, 2) == 0.0);
    CHECK(eof_effective(r, 3, 2, 2, 1).eof == doctest::Approx(0.0));
  }
  CMat tiny = CMat::Zero(9, 9);
  tiny(4, 4) = 1.0;
  CHECK_FALSE(eof_effective(tiny, 3, 3, 2, 2).reliable);
  CHECK_THROWS_AS(eof_effective(tiny, 3, 3, 3, 1), Error);
}

TEST_CASE("decay fit on a decaying single-photon superposition") {
  const DeviceModel d = default_device();
  const CompositeSpace s({{"A", 2}, {"B", 2}});
  const CVec v = testing::noon_vector(1, 2);
  NoiseSpec n;
  n.rates["A"].relax_rate = 1.0 / d.resonators.at("A").T1;
  n.rates["B"].relax_rate = 1.0 / d.resonators.at("B").T1;
  PulseSchedule idle;
  idle.duration = 4000.0;
  std::vector<double> t;
  for (double x = 0.0; x <= 4000.0; x += 500.0) t.push_back(x);
  EvolveOptions o;
  o.dt = 1.0;
  const auto r = evolve_lindblad(QuantumState::density(s, v * v.adjoint()), d, idle, n, t, o);
  std::vector<std::pair<double, cplx>> series;
  for (size_t i = 0; i < t.size(); ++i) series.emplace_back(t[i], r.states[i].matrix()(1, 2));
  const DecayFit f = decay_fit(series, "<01|rho|10>");
  const double rate = 0.5 * (1.0 / 3500.0 + 1.0 / 3300.0);
  CHECK(1.0 / f.tau_D == doctest::Approx(rate).epsilon(0.05));
  CHECK(f.amplitude == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(f.element == "<01|rho|10>");

  std::vector<std::pair<double, cplx>> growing;
  for (int i = 0; i < 6; ++i) growing.emplace_back(i, std::exp(0.1 * i));
  CHECK_THROWS_AS(decay_fit(growing), Error);
  CHECK_THROWS_AS(decay_fit({{0.0, 1.0}, {1.0, 0.5}}), Error);
}

TEST_CASE("phase fit") {
  std::vector<std::pair<double, cplx>> s;
  for (int i = 0; i < 8; ++i) s.emplace_back(0.3 * i, std::polar(0.5, 0.2 + 2.0 * 0.3 * i));
  const PhaseFit f = phase_fit(s);
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(0.2));
  CHECK_FALSE(f.ambiguous);

  std::vector<std::pair<double, cplx>> flat;
  for (int i = 0; i < 5; ++i) flat.emplace_back(i, std::polar(1.0, 1.1));
  CHECK(std::abs(phase_fit(flat).slope) < 1e-14);

  std::vector<std::pair<double, cplx>> jumpy;
  for (int i = 0; i < 5; ++i) jumpy.emplace_back(i, std::polar(1.0, 2.0 * i));
  CHECK(phase_fit(jumpy).ambiguous);
}

TEST_CASE("metric records") {
  const auto r = metric_record("fidelity", 0.9, 0.01, {{"target_phase", 0.1}});
  CHECK(r["metric"] == "fidelity");
  CHECK(r["value"] == 0.9);
  CHECK(r["diagnostics"]["target_phase"] == 0.1);
}

}  // TEST_SUITE
