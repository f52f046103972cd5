#pragma once

// Schrodinger and Lindblad time evolution for a DeviceModel driven by a
// PulseSchedule.
//
// Both integrators are fixed-step RK4.  Between consecutive schedule
// breakpoints the diagonal part of H is constant, so the step is taken in
// the interaction picture of that diagonal part: only the exchange and drive
// terms are integrated numerically, the diagonal phases are applied exactly.

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "noon/hilbert.hpp"
#include "noon/model.hpp"

namespace noon {

/// The integrator left its accuracy envelope (norm or trace drift, loss of
/// positivity).
class StepSizeError : public Error {
 public:
  using Error::Error;
};

struct SubsystemNoise {
  double relax_rate = 0.0;    // 1/T1, 1/ns
  double dephase_rate = 0.0;  // 1/Tphi, 1/ns
};

struct NoiseSpec {
  std::map<std::string, SubsystemNoise> rates;

  static NoiseSpec none() { return {}; }
  bool is_noiseless() const;
  SubsystemNoise of(const std::string& label) const;
};

/// Relaxation and dephasing rates from the device, using the qubit Tphi that
/// applies to a sequence of `sequence_length` ns.  Resonator dephasing is
/// taken from ResonatorParams::Tphi (infinite by default).
NoiseSpec noise_from_device(const DeviceModel& device, double sequence_length);

struct EvolveOptions {
  double dt = 0.05;              // ns
  double drift_tolerance = 1e-6; // norm (pure) or trace (Lindblad)
  double negativity_tolerance = 1e-6;
  double hermiticity_tolerance = 1e-9;
  /// Eigenvalue check at every sample when dim is at most this, otherwise
  /// only on the final state.
  int full_positivity_check_dim = 128;
  DisplacementOptions displacement = {};
};

struct EvolutionResult {
  std::vector<double> times;
  std::vector<QuantumState> states;
  /// Largest single-step change of norm (pure) or trace (density).
  double max_step_error = 0.0;
  /// Accumulated norm / trace deviation at the last sample.
  double drift = 0.0;
  long steps = 0;
};

/// i d psi/dt = H(t) psi.  sample_times must be sorted within [0, duration].
EvolutionResult evolve_pure(const QuantumState& initial, const DeviceModel& device,
                            const PulseSchedule& schedule,
                            std::span<const double> sample_times,
                            const EvolveOptions& opts = {});

/// d rho/dt = -i[H, rho] + sum_k D[L_k] rho with L = sqrt(1/T1) b for
/// relaxation and L = sqrt(2/Tphi) n for pure dephasing on every subsystem.
EvolutionResult evolve_lindblad(const QuantumState& initial,
                                const DeviceModel& device,
                                const PulseSchedule& schedule,
                                const NoiseSpec& noise,
                                std::span<const double> sample_times,
                                const EvolveOptions& opts = {});

/// Largest trace distance between corresponding samples of two runs.
double convergence_check(const EvolutionResult& coarse,
                         const EvolutionResult& fine);

/// Runs `run(dt)` and `run(dt / 2)` and compares them.
double convergence_check(const std::function<EvolutionResult(double)>& run,
                         double dt);

}  // namespace noon
