#pragma once

// State-preparation sequences compiled into PulseSchedules, and the numeric
// calibrations (pi pulses, swap durations) they depend on.

#include <compare>
#include <map>
#include <string>
#include <vector>

#include "noon/hilbert.hpp"
#include "noon/model.hpp"

namespace noon {

struct SwapKey {
  std::string qubit;
  std::string resonator;
  Transition transition = Transition::ge;
  int n = 1;  // photon number in the resonator after the swap
  auto operator<=>(const SwapKey&) const = default;
};

struct SwapCalibration {
  double duration = 0.0;            // ns, full iSWAP
  double detuning_offset_mhz = 0.0; // added to the nominal resonance point
  double transfer = 0.0;            // achieved transfer probability
};

struct PiCalibration {
  double amplitude = 0.0;           // peak Rabi rate, rad/ns
  double carrier_offset_mhz = 0.0;
  double transfer = 0.0;
  double leakage = 0.0;             // population outside the two levels
};

struct CalibrationTable {
  std::map<SwapKey, SwapCalibration> swaps;
  std::map<std::pair<std::string, Transition>, PiCalibration> pi_pulses;

  /// Throws Error naming the missing entry.
  const SwapCalibration& swap(const SwapKey& key) const;
  const PiCalibration& pi(const std::string& qubit, Transition t) const;
};

std::string describe(const SwapKey& key);

enum class ProtocolKind {
  noon,
  moon,
  bell,
  product_benchmark,
  eigenstate_benchmark,
  mixed_component,
};

std::string to_string(ProtocolKind k);
ProtocolKind protocol_kind_from_string(const std::string& s);

enum class PhaseMethod { none, delay, displacement };

std::string to_string(PhaseMethod m);
PhaseMethod phase_method_from_string(const std::string& s);

struct ProtocolSpec {
  ProtocolKind kind = ProtocolKind::noon;
  int N = 1;
  int M = 0;  // MOON only
  /// mixed_component: which resonator receives the photon, "A" or "B".
  std::string mixed_side = "A";
  PhaseMethod phase_method = PhaseMethod::none;
  /// Method 1: hold time between Bell creation and transfer (ns).
  double delay_before_transfer = 0.0;
  /// Method 1: frequency difference held between the two qubit-resonator
  /// detunings during the delay (MHz).
  double hold_detuning_mhz = 21.6;
  /// Method 2: phase added to every tomography displacement of A (rad).
  double tomography_phase_offset = 0.0;
  /// Steps II/III transfers of both qubits one after the other.
  bool sequential_transfers = false;

  void validate() const;
  /// Photon levels needed per storage resonator to hold the prepared state.
  int levels_A() const;
  int levels_B() const;
};

struct CompileOptions {
  double buffer = 1.0;       // ns between consecutive steps
  double pi_fwhm = 10.0;     // ns
};

struct CalibrationOptions {
  double pi_fwhm = 10.0;
  double dt = 0.05;
  /// Detuning-offset search interval (MHz, symmetric).
  double max_offset_mhz = 6.0;
  double min_transfer = 0.99;
  /// Coordinate-descent passes of tune_in_sequence; 0 disables it.
  int sequence_passes = 2;
};

/// Scans interaction time and detuning offset for the swap
/// |x, n-1> -> |x-1, n> (x = e for ge, f for ef) on the isolated
/// qubit-resonator pair.  Throws Error when the best transfer is below
/// opts.min_transfer.
SwapCalibration calibrate_swap(const DeviceModel& device, const std::string& qubit,
                               const std::string& resonator, Transition transition,
                               int n, const CalibrationOptions& opts = {});

/// Peak amplitude and carrier offset of a pi pulse on the bare qutrit at its
/// idle point.
PiCalibration calibrate_pi(const DeviceModel& device, const std::string& qubit,
                           Transition transition, const CalibrationOptions& opts = {});

/// Analytic on-resonance iSWAP time 1/(2 sqrt(n) g_eff/pi), with the sqrt(2)
/// ef matrix-element factor.
double analytic_swap_time(const DeviceModel& device, const std::string& qubit,
                          const std::string& resonator, Transition transition, int n);

/// Swap and pi entries required by compile(spec).
std::vector<SwapKey> required_swaps(const ProtocolSpec& spec);
std::vector<std::pair<std::string, Transition>> required_pulses(const ProtocolSpec& spec);

/// Calibrates every entry compile(spec) needs, skipping ones already in
/// `existing`.
CalibrationTable calibrate_for(const DeviceModel& device, const ProtocolSpec& spec,
                               CalibrationTable existing = {},
                               const CalibrationOptions& opts = {});

struct SequenceTuning {
  CalibrationTable table;
  double fidelity_before = 0.0;
  double fidelity_after = 0.0;
  int evaluations = 0;
};

/// Noiseless fidelity of the compiled NOON/MOON sequence against its target,
/// with the branch phase taken from the state itself.
double generation_fidelity(const DeviceModel& device, const CalibrationTable& calib,
                           const ProtocolSpec& spec);

/// Refines the swap durations, swap offsets and pi amplitudes used by a
/// NOON or MOON spec against generation_fidelity, starting from the
/// pair-wise calibration.  Other kinds are returned unchanged.  The result
/// is specific to spec and should not be shared with other photon numbers.
SequenceTuning tune_in_sequence(const DeviceModel& device, const ProtocolSpec& spec,
                                CalibrationTable table, const CalibrationOptions& opts = {});

PulseSchedule compile_noon(const DeviceModel& device, const CalibrationTable& calib,
                           int N, const CompileOptions& opts = {},
                           bool sequential = false);
PulseSchedule compile_moon(const DeviceModel& device, const CalibrationTable& calib,
                           int M, int N, const CompileOptions& opts = {},
                           bool sequential = false);
/// Qubit Bell state only (step I).
PulseSchedule compile_bell(const DeviceModel& device, const CalibrationTable& calib,
                           const CompileOptions& opts = {});
PulseSchedule compile_benchmark(const DeviceModel& device, const CalibrationTable& calib,
                                ProtocolKind kind, const std::string& mixed_side = "A",
                                const CompileOptions& opts = {});

/// Dispatches on spec.kind and applies the phase method.
PulseSchedule compile(const DeviceModel& device, const CalibrationTable& calib,
                      const ProtocolSpec& spec, const CompileOptions& opts = {});

/// Method 1 inserts spec.delay_before_transfer after the step labelled
/// "bell" and holds q1 so that the two qubit-resonator detunings differ by
/// spec.hold_detuning_mhz.  Method 2 records the tomography phase offset.
PulseSchedule apply_phase_method(const DeviceModel& device, const ProtocolSpec& spec,
                                 const PulseSchedule& schedule);

/// Appends an idle period of `delay` ns to the end of a schedule.
PulseSchedule with_idle(const PulseSchedule& schedule, double delay);

/// Full device space (q0, q1, A, B, C) sized for spec, C at 3 levels.
CompositeSpace generation_space(const ProtocolSpec& spec, int levels_C = 3);

/// Pure two-resonator target in photon indices (A major) with the relative
/// phase theta on the |0N> branch: (|M0> + e^{i theta}|0N>)/sqrt(2).
CVec noon_target(int M, int N, int levels_A, int levels_B, double theta = 0.0);

}  // namespace noon
