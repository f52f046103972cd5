#pragma once

// Device parameters, pulse schedules and the rotating-frame Hamiltonian of
// two three-level qubits coupled to storage resonators A, B and a shared
// coupling resonator C.
//
// Units: GHz / MHz / ns at every interface.  Angular conversion (2*pi) only
// happens inside DeviceHamiltonian.  Couplings are quoted as g/pi in MHz,
// i.e. the vacuum-Rabi splitting in linear frequency.

#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "noon/hilbert.hpp"

namespace noon {

constexpr double kTwoPi = 6.283185307179586476925;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct ResonatorParams {
  double f_r = 0.0;     // GHz
  double T1 = 0.0;      // ns
  double Tphi = kInf;   // ns
};

struct QubitParams {
  double f_ge_idle = 0.0;   // GHz
  double f_nl = 0.2;        // GHz, f_ge - f_ef
  double T1 = 0.0;          // ns
  double Tphi_short = 300;  // ns
  double Tphi_long = 200;   // ns
};

using CouplingKey = std::pair<std::string, std::string>;

struct DeviceModel {
  std::map<std::string, ResonatorParams> resonators;  // A, B, C
  std::map<std::string, QubitParams> qubits;          // q0, q1
  std::map<CouplingKey, double> g_over_pi;             // MHz
  double f_ref = 6.55;                                 // GHz
  /// Sequence length (ns) up to which Tphi_short applies.
  double tphi_crossover = 75.0;

  /// Throws Error on any violated invariant.
  void validate() const;
  /// g/pi in MHz for (qubit, resonator), 0 when the pair is not coupled.
  double coupling(const std::string& qubit, const std::string& resonator) const;
  /// Angular coupling g in rad/ns.
  double coupling_rad(const std::string& qubit, const std::string& resonator) const;
};

DeviceModel default_device();

/// 1/Tphi = 1/T2 - 1/(2 T1).  Throws Error when the result is not a finite
/// positive time.
double tphi_from_ramsey(double T2, double T1);

/// Per-qubit Tphi for a pulse sequence of the given length.
std::map<std::string, double> sequence_tphi(const DeviceModel& device,
                                            double sequence_length);

enum class Transition { ge, ef };

std::string to_string(Transition t);
Transition transition_from_string(const std::string& s);

/// Qubit f_ge(t) moves linearly from f_start to f_end over [t_start, t_end).
/// Equal endpoints give the square tuning pulses used by the protocols.
struct DetuningSegment {
  double t_start = 0.0;
  double t_end = 0.0;
  double f_start = 0.0;
  double f_end = 0.0;
};

/// Gaussian drive envelope truncated at +-2 sigma.  `amplitude` is the
/// peak Rabi rate in rad/ns.
struct DrivePulse {
  double center = 0.0;
  double fwhm = 10.0;
  cplx amplitude = 0.0;
  Transition carrier = Transition::ge;
  double phase = 0.0;
  double carrier_offset_mhz = 0.0;

  double sigma() const { return fwhm / 2.354820045030949; }
  double start() const { return center - 2.0 * sigma(); }
  double end() const { return center + 2.0 * sigma(); }
  double envelope(double t) const;
};

/// Instantaneous coherent displacement of a resonator.
struct DisplacementPulse {
  double time = 0.0;
  cplx alpha = 0.0;
};

struct ScheduleStep {
  std::string label;
  std::string channel;  // q0, q1, or "both"
  double t_start = 0.0;
  double t_end = 0.0;
};

struct PulseSchedule {
  double duration = 0.0;
  std::map<std::string, std::vector<DetuningSegment>> detuning;
  std::map<std::string, std::vector<DrivePulse>> drives;
  std::map<std::string, std::vector<DisplacementPulse>> displacements;
  std::vector<ScheduleStep> steps;
  /// Extra phase (rad) applied to every tomography displacement of A.
  double tomography_phase_offset = 0.0;

  void validate() const;
  /// Qubit f_ge at time t: the active detuning segment, else the idle point.
  double qubit_frequency(const DeviceModel& device, const std::string& qubit,
                         double t) const;
  /// Sorted times inside (0, duration) where the Hamiltonian changes
  /// non-smoothly: segment edges, pulse windows and displacement events.
  std::vector<double> breakpoints() const;
  /// True if no detuning segment is linear over (a, b).
  bool piecewise_constant_on(double a, double b) const;
};

/// Frequency of a qubit level relative to the ground state (GHz, lab
/// frame): k*f_ge - f_nl*k*(k-1)/2.
double qudit_level_frequency(double f_ge, double f_nl, int level);

/// Time-dependent Hamiltonian split into a diagonal part and sparse
/// off-diagonal terms, assembled for one CompositeSpace.  Subsystems that
/// are absent from the space are dropped along with their couplings.
class DeviceHamiltonian {
 public:
  DeviceHamiltonian(const DeviceModel& device, const PulseSchedule& schedule,
                    const CompositeSpace& space);

  const CompositeSpace& space() const { return space_; }
  /// Diagonal (rad/ns) at time t.
  Eigen::VectorXd diagonal(double t) const;
  /// Excitation-conserving qubit-resonator exchange terms.
  const SpMat& coupling() const { return coupling_; }

  struct DriveTerm {
    const SpMat* lowering;
    const SpMat* raising;
    cplx omega;  // Omega(t) multiplying raising; conj multiplies lowering
  };
  std::vector<DriveTerm> drives(double t) const { return drives(t, t); }
  /// Pulses are selected by whether they cover `inside`, so an integration
  /// interval sees exactly the pulses active in its interior even at its
  /// end points, where a truncated envelope is discontinuous.
  std::vector<DriveTerm> drives(double t, double inside) const;
  bool has_drives() const;

  /// Complete Hamiltonian as a dense operator.
  Operator dense(double t) const;

  const SpMat& lowering(const std::string& label) const;
  const Eigen::VectorXd& number(const std::string& label) const;

 private:
  DeviceModel device_;
  PulseSchedule schedule_;
  CompositeSpace space_;
  SpMat coupling_;
  std::map<std::string, SpMat> lowering_;
  std::map<std::string, SpMat> raising_;
  std::map<std::string, Eigen::VectorXd> number_;
  Eigen::VectorXd static_diag_;
};

Operator hamiltonian_at(const DeviceModel& device, const PulseSchedule& schedule,
                        double t, const CompositeSpace& space);

/// Total excitation number (sum of qudit level indices and photon numbers).
Eigen::VectorXd excitation_number(const CompositeSpace& space);

/// Convert a two-resonator density matrix (photon indices, A major) from
/// the common f_ref frame at time t into each resonator's own rotating frame.
CMat to_resonator_frame(const CMat& rho_ab, int levels_a, int levels_b,
                        const DeviceModel& device, double t);

}  // namespace noon
