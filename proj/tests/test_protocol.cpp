#include <doctest.h>

#include "common.hpp"
#include "noon/dynamics.hpp"
#include "noon/protocol.hpp"

using namespace noon;

namespace {

struct Generated {
  PulseSchedule schedule;
  QuantumState state;
};

Generated generate(const ProtocolSpec& spec) {
  const DeviceModel d = testing::parked_device();
  CalibrationTable cal = calibrate_for(d, spec, testing::shared_calibration());
  cal = tune_in_sequence(d, spec, cal).table;
  PulseSchedule s = compile(d, cal, spec);
  const CompositeSpace space = generation_space(spec);
  const QuantumState vac = fock_state(space, std::vector<int>(5, 0));
  return {s, evolve_pure(vac, d, s, std::vector<double>{s.duration}).states.back()};
}

CMat resonators(const Generated& g, const ProtocolSpec& spec) {
  return to_resonator_frame(partial_trace(g.state, {"A", "B"}).matrix(), spec.levels_A(),
                            spec.levels_B(), testing::parked_device(), g.schedule.duration);
}

}  // namespace

TEST_SUITE("protocol") {

TEST_CASE("spec validation and levels") {
  ProtocolSpec s;
  s.N = 2;
  CHECK(s.levels_A() == 3);
  CHECK(s.levels_B() == 3);
  s.kind = ProtocolKind::moon;
  s.M = 2;
  s.N = 2;
  CHECK_THROWS_AS(s.validate(), Error);
  s.N = 1;
  CHECK_NOTHROW(s.validate());
  CHECK(s.levels_A() == 3);
  s = ProtocolSpec{};
  s.kind = ProtocolKind::mixed_component;
  s.mixed_side = "C";
  CHECK_THROWS_AS(s.validate(), Error);
  s = ProtocolSpec{};
  s.N = 2;
  s.phase_method = PhaseMethod::delay;
  CHECK_THROWS_AS(s.validate(), Error);
  CHECK(protocol_kind_from_string(to_string(ProtocolKind::eigenstate_benchmark)) ==
        ProtocolKind::eigenstate_benchmark);
}

TEST_CASE("analytic and calibrated swap times") {
  const DeviceModel d = testing::parked_device();
  CHECK(analytic_swap_time(d, "q0", "A", Transition::ge, 1) == doctest::Approx(28.0899).epsilon(1e-4));
  const auto& cal = testing::shared_calibration();
  const double t1 = cal.swap({"q0", "A", Transition::ge, 1}).duration;
  CHECK(t1 == doctest::Approx(28.09).epsilon(0.01));
  for (const char* q : {"q0", "q1"}) {
    const std::string r = q[1] == '0' ? "A" : "B";
    const double ge1 = cal.swap({q, r, Transition::ge, 1}).duration;
    for (int n = 2; n <= 3; ++n)
      CHECK(cal.swap({q, r, Transition::ge, n}).duration == doctest::Approx(ge1 / std::sqrt(n)).epsilon(0.02));
    const double ef1 = cal.swap({q, r, Transition::ef, 1}).duration;
    CHECK(cal.swap({q, r, Transition::ef, 2}).duration == doctest::Approx(ef1 / std::sqrt(2.0)).epsilon(0.02));
    CHECK(ge1 / ef1 == doctest::Approx(std::sqrt(2.0)).epsilon(0.03));
  }
  for (const auto& [key, v] : cal.swaps) CHECK(v.transfer >= 0.99);
  CHECK_THROWS_AS(cal.swap({"q0", "A", Transition::ge, 7}), Error);
}

TEST_CASE("pi pulse calibration") {
  const auto& cal = testing::shared_calibration();
  const PiCalibration& ge = cal.pi("q0", Transition::ge);
  CHECK(ge.transfer >= 0.999);
  CHECK(ge.leakage <= 1e-3);
  CHECK(cal.pi("q1", Transition::ef).transfer >= 0.999);
}

TEST_CASE("noon schedule layout") {
  const DeviceModel d = testing::parked_device();
  double last = 0.0;
  for (int N = 1; N <= 3; ++N) {
    ProtocolSpec spec;
    spec.N = N;
    const PulseSchedule s = compile(d, testing::shared_calibration(), spec);
    CHECK(s.duration > last);
    last = s.duration;
    CHECK(s.steps.size() == static_cast<size_t>(3 + 2 * (N - 1) + 1));
    for (size_t i = 0; i < s.steps.size(); ++i) {
      CHECK(s.steps[i].t_end > s.steps[i].t_start);
      if (i > 0) CHECK(s.steps[i].t_start >= s.steps[i - 1].t_end);
    }
    CHECK(s.steps.back().label == "iswap_ge");
  }
}

TEST_CASE("generated noon states") {
  for (int N = 1; N <= 3; ++N) {
    ProtocolSpec spec;
    spec.N = N;
    const Generated g = generate(spec);
    const CMat rho = resonators(g, spec);
    CHECK((rho * rho).trace().real() >= 0.99);
    const CMat q = partial_trace(g.state, {"q0", "q1"}).matrix();
    CHECK(1.0 - q(0, 0).real() <= 2e-3);
    if (N == 1) {
      const double theta = std::arg(rho(1, 2));
      const CVec t = noon_target(1, 1, 2, 2, theta);
      CHECK((t.adjoint() * rho * t)(0, 0).real() >= 0.99);
      CHECK(1.0 - q(0, 0).real() <= 1e-3);
    }
  }
}

TEST_CASE("sequence tune-up") {
  const DeviceModel d = testing::parked_device();
  ProtocolSpec spec;
  const CalibrationTable& raw = testing::shared_calibration();
  const SequenceTuning t = tune_in_sequence(d, spec, raw);
  CHECK(t.fidelity_before == doctest::Approx(generation_fidelity(d, raw, spec)).epsilon(1e-12));
  CHECK(t.fidelity_after >= t.fidelity_before);
  CHECK(t.fidelity_after == doctest::Approx(generation_fidelity(d, t.table, spec)).epsilon(1e-12));
  for (const auto& key : required_swaps(spec))
    CHECK(std::abs(t.table.swap(key).duration - raw.swap(key).duration) < 1.0);

  CalibrationOptions off;
  off.sequence_passes = 0;
  const SequenceTuning none = tune_in_sequence(d, spec, raw, off);
  CHECK(none.table.swap({"q0", "A", Transition::ge, 1}).duration ==
        raw.swap({"q0", "A", Transition::ge, 1}).duration);
  ProtocolSpec eig;
  eig.kind = ProtocolKind::eigenstate_benchmark;
  CHECK_THROWS_AS(generation_fidelity(d, raw, eig), Error);
}

TEST_CASE("moon and benchmark states") {
  ProtocolSpec moon;
  moon.kind = ProtocolKind::moon;
  moon.M = 2;
  moon.N = 1;
  const CMat rm = resonators(generate(moon), moon);
  const int lb = moon.levels_B();
  const CVec t = noon_target(2, 1, moon.levels_A(), lb, std::arg(rm(1, 2 * lb)));
  CHECK((t.adjoint() * rm * t)(0, 0).real() >= 0.99);

  ProtocolSpec eig;
  eig.kind = ProtocolKind::eigenstate_benchmark;
  const CMat re = resonators(generate(eig), eig);
  CHECK(re(2 * eig.levels_B(), 2 * eig.levels_B()).real() >= 0.99);

  ProtocolSpec mix;
  mix.kind = ProtocolKind::mixed_component;
  mix.mixed_side = "B";
  const CMat rx = resonators(generate(mix), mix);
  CHECK(rx(1, 1).real() >= 0.99);
}

TEST_CASE("phase methods") {
  const DeviceModel d = testing::parked_device();
  ProtocolSpec spec;
  const PulseSchedule base = compile(d, testing::shared_calibration(), spec);
  spec.phase_method = PhaseMethod::delay;
  const PulseSchedule same = compile(d, testing::shared_calibration(), spec);
  CHECK(same.duration == base.duration);
  CHECK(same.steps.size() == base.steps.size());
  spec.delay_before_transfer = 12.0;
  const PulseSchedule held = compile(d, testing::shared_calibration(), spec);
  // the hold is its own segment, separated by one buffer
  CHECK(held.duration == doctest::Approx(base.duration + 12.0 + CompileOptions{}.buffer));
  spec.phase_method = PhaseMethod::displacement;
  spec.delay_before_transfer = 0.0;
  spec.tomography_phase_offset = 0.3;
  CHECK(compile(d, testing::shared_calibration(), spec).tomography_phase_offset == 0.3);

  const PulseSchedule idle = with_idle(base, 100.0);
  CHECK(idle.duration == doctest::Approx(base.duration + 100.0));
}

TEST_CASE("noon target") {
  const CVec t = noon_target(2, 1, 3, 2, 0.5);
  CHECK(t.norm() == doctest::Approx(1.0));
  CHECK(std::abs(t(2 * 2)) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(std::arg(t(1)) == doctest::Approx(0.5));
  CHECK_THROWS_AS(noon_target(3, 1, 3, 2), Error);
}

}  // TEST_SUITE
