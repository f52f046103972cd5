#pragma once

// Simulated joint readout of the two qubits after a probe interaction with
// the storage resonators, with shot sampling and a readout-error model.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "noon/dynamics.hpp"
#include "noon/hilbert.hpp"
#include "noon/model.hpp"

namespace noon {

/// Outcome order used everywhere: gg, ge, eg, ee (first letter q0).
using Joint = std::array<double, 4>;

struct ReadoutModel {
  std::map<std::string, double> p_e_given_g;  // per qubit
  std::map<std::string, double> p_g_given_e;
  bool f_as_excited = true;

  static ReadoutModel ideal();
  /// 0.95 (g) / 0.90 (e) readout fidelity on both qubits.
  static ReadoutModel typical();

  void validate() const;
  bool is_ideal() const;
  /// measured = C * true, columns indexed by the true outcome.
  Eigen::Matrix4d confusion() const;
};

struct TraceSet {
  std::vector<double> tau;
  std::vector<Joint> probs;
  /// Raw counts per tau; empty in exact mode.
  std::vector<std::array<long, 4>> counts;
  /// Shots per tau point; 0 marks exact (infinite-shot) probabilities.
  long shots = 0;
  cplx alpha = 0.0;
  cplx beta = 0.0;
  std::uint64_t seed = 0;
  /// Total probability mass clipped by correct_readout, and the most
  /// negative corrected probability before clipping.
  double clipped_mass = 0.0;
  double min_corrected = 0.0;

  bool exact() const { return shots == 0; }
  void validate() const;
};

/// Projective probabilities of {g} vs {e, f} on q0 and q1, traced over
/// everything else.  With f_as_excited = false, f is read as g.
Joint joint_probabilities(const QuantumState& state, bool f_as_excited = true);

/// Deterministic per-point seed derived from (seed, index).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

/// Multinomial draw of `shots` outcomes for each tau.  Point i uses
/// derive_seed(seed, i), so results do not depend on evaluation order.
TraceSet sample_trace(const TraceSet& exact, long shots, std::uint64_t seed);

/// Pushes probabilities through the readout confusion matrix.
TraceSet apply_readout(const TraceSet& trace, const ReadoutModel& readout);

/// Inverts the 4x4 confusion matrix per tau, clips negatives and
/// renormalizes.  Clipping is recorded in the returned TraceSet.
TraceSet correct_readout(const TraceSet& raw, const ReadoutModel& readout);

/// Equal-weight average of two trace sets on identical grids.
TraceSet synth_mixed_ensemble(const TraceSet& a, const TraceSet& b);

struct ProbeOptions {
  EvolveOptions evolve = {};
};

/// Both qubits are tuned onto their storage resonators at t = 0 and held
/// for every tau; the state is evolved on its own space (pure when the
/// noise is off and the state is pure, Lindblad otherwise).
/// shots = 0 gives exact probabilities.  Throws Error for negative shots.
TraceSet coincidence_trace(const DeviceModel& device, const QuantumState& prepared,
                           const std::vector<double>& taus, const NoiseSpec& noise,
                           long shots, const ReadoutModel& readout, std::uint64_t seed,
                           const ProbeOptions& opts = {});

/// Factorized probe: during the interaction q0-A and q1-B evolve as
/// independent qutrit-resonator pairs.  excited(side)(i*photons + m, t) is
/// the probability that the qubit reads excited at taus[t] after starting in
/// |i, m>.
class ProbeModel {
 public:
  ProbeModel(const DeviceModel& device, const NoiseSpec& noise, std::vector<double> taus,
             int photons_A, int photons_B, bool f_as_excited = true,
             const ProbeOptions& opts = {});

  const std::vector<double>& taus() const { return taus_; }
  int photons(int side) const { return side == 0 ? photons_A_ : photons_B_; }
  const Eigen::MatrixXd& excited(int side) const { return excited_[side]; }

  /// Joint probabilities for a state given by its qubit-diagonal photon
  /// populations pop(i*3 + k)(m*photons_B + n) (q0 level i, q1 level k).
  std::vector<Joint> joint(const std::vector<Eigen::VectorXd>& pop) const;

  /// Trace for the product of a qubit population table p(i, k) and the Fock
  /// state |m, n>.
  std::vector<Joint> fock_trace(const Eigen::Matrix3d& qubit_pops, int m, int n) const;

 private:
  std::vector<double> taus_;
  int photons_A_, photons_B_;
  Eigen::MatrixXd excited_[2];
};

/// Blocks <ik| rho |ik> over (A, B) for q0 level i and q1 level k, stored
/// at index i*3 + k.  `state` must contain q0, q1, A and B; anything else
/// is traced out.
std::vector<CMat> qubit_diagonal_blocks(const QuantumState& state);

/// Photon populations of D(a) (x) D(b) applied to each block, on
/// photons_A x photons_B levels (index m*photons_B + n).  Throws
/// TruncationError when a displaced column loses more than `tail_tolerance`
/// of its norm to the crop.
std::vector<Eigen::VectorXd> displaced_populations(const std::vector<CMat>& blocks,
                                                   int levels_A, int levels_B,
                                                   cplx a, cplx b, int photons_A,
                                                   int photons_B,
                                                   double tail_tolerance = 1e-3);

/// Populations p(i, k) of the two qubits.
Eigen::Matrix3d qubit_populations(const QuantumState& state);

void write_csv(std::ostream& out, const TraceSet& trace);
void write_csv(std::ostream& out, const std::vector<TraceSet>& traces);
std::vector<TraceSet> read_csv(std::istream& in);

}  // namespace noon
