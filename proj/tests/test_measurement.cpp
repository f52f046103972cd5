#include <doctest.h>

#include <random>
#include <sstream>

#include "common.hpp"
#include "noon/measurement.hpp"
#include "noon/protocol.hpp"

using namespace noon;

namespace {

QuantumState product_state(const CompositeSpace& space, const std::vector<std::pair<std::vector<int>, cplx>>& terms) {
  CVec psi = CVec::Zero(space.dim());
  for (const auto& [occ, amp] : terms) psi(space.flatten(occ)) += amp;
  return QuantumState::pure(space, psi.normalized());
}

std::vector<double> tau_grid(double stop, double step) {
  std::vector<double> t;
  for (double x = 0.0; x <= stop + 1e-9; x += step) t.push_back(x);
  return t;
}

double max_dev(const TraceSet& a, const TraceSet& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.probs.size(); ++i)
    for (int k = 0; k < 4; ++k) m = std::max(m, std::abs(a.probs[i][k] - b.probs[i][k]));
  return m;
}

const CompositeSpace kSpace({{"q0", 3}, {"q1", 3}, {"A", 3}, {"B", 3}});

}  // namespace

TEST_SUITE("measurement") {

TEST_CASE("joint probabilities") {
  const Joint g = joint_probabilities(fock_state(kSpace, std::vector<int>{0, 0, 0, 0}));
  CHECK(g[0] == 1.0);
  const QuantumState bell = product_state(kSpace, {{{1, 0, 0, 0}, 1.0}, {{0, 1, 0, 0}, 1.0}});
  const Joint b = joint_probabilities(bell);
  CHECK(b[1] == doctest::Approx(0.5));
  CHECK(b[2] == doctest::Approx(0.5));
  const QuantumState ff = fock_state(kSpace, std::vector<int>{2, 2, 0, 0});
  CHECK(joint_probabilities(ff)[3] == 1.0);
  CHECK(joint_probabilities(ff, false)[0] == 1.0);

  std::mt19937_64 rng(9);
  for (int k = 0; k < 5; ++k) {
    const Joint p = joint_probabilities(QuantumState::pure(kSpace, testing::random_pure(kSpace.dim(), rng)));
    CHECK(std::abs(p[0] + p[1] + p[2] + p[3] - 1.0) < 1e-9);
  }
}

TEST_CASE("readout confusion round trip") {
  const ReadoutModel typ = ReadoutModel::typical();
  CHECK(typ.p_e_given_g.at("q0") == doctest::Approx(0.05));
  CHECK(typ.p_g_given_e.at("q1") == doctest::Approx(0.10));
  const Eigen::Matrix4d c = typ.confusion();
  for (int j = 0; j < 4; ++j) CHECK(c.col(j).sum() == doctest::Approx(1.0));

  TraceSet t;
  t.tau = {0.0, 1.0};
  t.probs = {Joint{0.7, 0.1, 0.15, 0.05}, Joint{0.2, 0.3, 0.4, 0.1}};
  const TraceSet same = correct_readout(t, ReadoutModel::ideal());
  CHECK(max_dev(same, t) == 0.0);
  const TraceSet back = correct_readout(apply_readout(t, typ), typ);
  CHECK(max_dev(back, t) < 1e-9);
  CHECK(back.clipped_mass == 0.0);

  ReadoutModel bad = typ;
  bad.p_e_given_g["q0"] = 0.95;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("sampling") {
  TraceSet exact;
  exact.tau = tau_grid(20.0, 1.0);
  for (size_t i = 0; i < exact.tau.size(); ++i) {
    const double s = std::pow(std::sin(0.1 * i), 2);
    exact.probs.push_back({0.5 * (1 - s), 0.5 * s, 0.4 * s, 0.5 - 0.4 * s});
  }
  CHECK(derive_seed(7, 3) == derive_seed(7, 3));
  CHECK(derive_seed(7, 3) != derive_seed(7, 4));
  const TraceSet a = sample_trace(exact, 1000, 42), b = sample_trace(exact, 1000, 42);
  CHECK(max_dev(a, b) == 0.0);
  CHECK(a.counts[3][0] + a.counts[3][1] + a.counts[3][2] + a.counts[3][3] == 1000);
  CHECK(max_dev(a, sample_trace(exact, 1000, 43)) > 0.0);
  CHECK_THROWS_AS(sample_trace(exact, -5, 1), Error);

  // deviation shrinks like 1/sqrt(shots), averaged over seeds
  std::vector<double> scaled;
  for (long shots : {100L, 1000L, 10000L}) {
    double mean = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s) mean += max_dev(sample_trace(exact, shots, s), exact);
    mean /= 20.0;
    scaled.push_back(mean * std::sqrt(static_cast<double>(shots)));
  }
  for (double v : scaled) {
    CHECK(v > 0.5);
    CHECK(v < 3.0);
  }

  // corrected sampled data stays above -0.05
  const ReadoutModel typ = ReadoutModel::typical();
  for (std::uint64_t s = 0; s < 10; ++s) {
    const TraceSet raw = sample_trace(apply_readout(exact, typ), 1000, s);
    CHECK(correct_readout(raw, typ).min_corrected > -0.05);
  }
}

TEST_CASE("mixed ensemble averaging") {
  TraceSet a;
  a.tau = {0.0, 1.0};
  a.probs = {Joint{1, 0, 0, 0}, Joint{0.5, 0.5, 0, 0}};
  const TraceSet same = synth_mixed_ensemble(a, a);
  CHECK(max_dev(same, a) == 0.0);
  TraceSet b = a;
  b.probs = {Joint{0, 1, 0, 0}, Joint{0.5, 0, 0.5, 0}};
  const TraceSet m = synth_mixed_ensemble(a, b);
  CHECK(m.probs[0][1] == 0.5);
  b.tau = {0.0, 2.0};
  CHECK_THROWS_AS(synth_mixed_ensemble(a, b), Error);
}

TEST_CASE("coincidence traces") {
  const DeviceModel d = testing::parked_device();
  const std::vector<double> taus = tau_grid(60.0, 2.0);

  const QuantumState vac = fock_state(kSpace, std::vector<int>{0, 0, 0, 0});
  const TraceSet flat = coincidence_trace(d, vac, taus, NoiseSpec::none(), 0, ReadoutModel::ideal(), 0);
  for (const auto& p : flat.probs) CHECK(std::abs(p[0] - 1.0) < 1e-12);

  for (int N = 1; N <= 2; ++N) {
    const QuantumState noon = product_state(kSpace, {{{0, 0, N, 0}, 1.0}, {{0, 0, 0, N}, 1.0}});
    const TraceSet e1 = coincidence_trace(d, noon, taus, NoiseSpec::none(), 0, ReadoutModel::ideal(), 1);
    const TraceSet e2 = coincidence_trace(d, noon, taus, NoiseSpec::none(), 0, ReadoutModel::ideal(), 99);
    CHECK(max_dev(e1, e2) == 0.0);
    double pee = 0.0, pge = 0.0;
    for (const auto& p : e1.probs) pee = std::max(pee, p[3]), pge = std::max(pge, p[1]);
    CHECK(pee <= 0.01);
    CHECK(pge == doctest::Approx(0.5).epsilon(0.05));
  }

  // the equal mixture of |10> and |01> is indistinguishable from N=1 NOON
  const QuantumState noon = product_state(kSpace, {{{0, 0, 1, 0}, 1.0}, {{0, 0, 0, 1}, 1.0}});
  const QuantumState a = fock_state(kSpace, std::vector<int>{0, 0, 1, 0});
  const QuantumState b = fock_state(kSpace, std::vector<int>{0, 0, 0, 1});
  const auto tn = coincidence_trace(d, noon, taus, NoiseSpec::none(), 0, ReadoutModel::ideal(), 0);
  const auto tm = synth_mixed_ensemble(
      coincidence_trace(d, a, taus, NoiseSpec::none(), 0, ReadoutModel::ideal(), 0),
      coincidence_trace(d, b, taus, NoiseSpec::none(), 0, ReadoutModel::ideal(), 0));
  CHECK(max_dev(tn, tm) < 1e-3);
}

TEST_CASE("factorized probe matches the joint evolution") {
  const DeviceModel d = testing::parked_device();
  const std::vector<double> taus = tau_grid(60.0, 3.0);
  const ProbeModel probe(d, NoiseSpec::none(), taus, 3, 3);
  for (const auto& occ : {std::vector<int>{0, 0, 1, 0}, std::vector<int>{0, 0, 2, 1},
                          std::vector<int>{1, 0, 0, 2}}) {
    const QuantumState s = fock_state(kSpace, occ);
    const TraceSet full = coincidence_trace(d, s, taus, NoiseSpec::none(), 0, ReadoutModel::ideal(), 0);
    Eigen::Matrix3d q = Eigen::Matrix3d::Zero();
    q(occ[0], occ[1]) = 1.0;
    const auto f = probe.fock_trace(q, occ[2], occ[3]);
    double m = 0.0;
    for (size_t i = 0; i < taus.size(); ++i)
      for (int k = 0; k < 4; ++k) m = std::max(m, std::abs(f[i][k] - full.probs[i][k]));
    CHECK(m < 1e-3);
  }
}

TEST_CASE("displaced populations") {
  const QuantumState s = product_state(kSpace, {{{0, 0, 1, 0}, 1.0}, {{0, 0, 0, 1}, 1.0}});
  const auto blocks = qubit_diagonal_blocks(s);
  REQUIRE(blocks.size() == 9);
  CHECK(blocks[0].trace().real() == doctest::Approx(1.0));
  const auto pops = displaced_populations(blocks, 3, 3, 0.0, 0.0, 3, 3);
  CHECK(pops[0](1 * 3 + 0) == doctest::Approx(0.5));
  CHECK(pops[0](0 * 3 + 1) == doctest::Approx(0.5));
  const auto moved = displaced_populations(blocks, 3, 3, 0.5, 0.5, 12, 12);
  CHECK(moved[0].sum() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK_THROWS_AS(displaced_populations(blocks, 3, 3, 1.3, 1.3, 4, 4), TruncationError);
  CHECK(qubit_populations(s)(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("csv round trip") {
  TraceSet t;
  t.tau = {0.0, 0.5};
  t.probs = {Joint{0.1, 0.2, 0.3, 0.4}, Joint{1.0 / 3.0, 0.0, 2.0 / 3.0, 0.0}};
  t.alpha = cplx(0.2, -0.1);
  t.seed = 12345678901234ULL;
  std::stringstream ss;
  write_csv(ss, std::vector<TraceSet>{t, t});
  const auto back = read_csv(ss);
  REQUIRE(back.size() == 2);
  CHECK(max_dev(back[1], t) == 0.0);
  CHECK(back[0].alpha == t.alpha);
  CHECK(back[0].seed == t.seed);
}

}  // TEST_SUITE
