#pragma once

// Two-resonator Wigner tomography: displacement grid, photon-population fits
// of coincidence traces, and linear inversion to a density matrix.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "noon/measurement.hpp"
#include "noon/nnls.hpp"

namespace noon {

struct DisplacementGrid {
  std::vector<double> radii;
  std::vector<int> points;  // per radius
  std::vector<std::pair<cplx, cplx>> pairs;
  std::vector<int> radius_of_pair;  // index into radii
};

/// Points on the circle of radius r for an N-photon state.
int points_per_circle(int N, double r);

std::vector<double> default_radii();

/// Radii {0, 0.2, 0.7, 0.9, 1.3} unless given; alpha and beta run over
/// every same-radius combination.
DisplacementGrid build_grid(int N, const std::vector<double>& radii = default_radii());

/// Smallest F such that D(r)|j> keeps at most `tail` of its norm above
/// photon number F - 1 for every j < levels.
int fit_dimension(int levels, double r, double tail = 1e-4);

struct PopulationBasis {
  int fit_A = 0, fit_B = 0;
  std::vector<double> taus;
  /// traces[m*fit_B + n][t]
  std::vector<std::vector<Joint>> traces;
};

/// Predicted traces of |m>_A |n>_B with the qubits in `qubit_pops`.
PopulationBasis population_basis(const ProbeModel& probe, const Eigen::Matrix3d& qubit_pops,
                                 int fit_A, int fit_B);
PopulationBasis population_basis(const DeviceModel& device, const NoiseSpec& noise,
                                 const Eigen::Matrix3d& qubit_pops, int fit_A, int fit_B,
                                 const std::vector<double>& taus);

struct PopulationFit {
  Eigen::MatrixXd P;  // fit_A x fit_B
  double residual = 0.0;
  double kkt = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Least-squares fit of a trace over the simplex of photon populations.
/// Sampled traces are weighted by their inverse binomial variance.
PopulationFit fit_populations(const TraceSet& measured, const PopulationBasis& basis,
                              const SimplexLsOptions& opts = {},
                              const std::vector<int>& warm = {});

/// Indices m*fit_B + n with nonzero population.
std::vector<int> support_of(const PopulationFit& fit);

struct DensityMatrixEstimate {
  int levels_A = 0, levels_B = 0;
  CMat rho;
  /// Per-element standard errors of |rho|, real and imaginary parts.
  Eigen::MatrixXd error_re, error_im;
  double residual = 0.0;
  double condition_number = 0.0;
  /// Sum of |negative eigenvalues| removed by the physicality projection.
  double clipped_mass = 0.0;
  double min_raw_eigenvalue = 0.0;

  std::string to_json() const;
  static DensityMatrixEstimate from_json(const std::string& text);
};

/// Linear map from rho (photon indices below levels_A, levels_B) to the
/// displaced photon populations of every grid pair, kept factorized so
/// repeated solves (bootstrap) reuse it.
class Reconstructor {
 public:
  /// fit dims per pair; `pairs` are the nominal displacements.
  Reconstructor(std::vector<std::pair<cplx, cplx>> pairs, std::vector<std::pair<int, int>> fit_dims,
                int levels_A, int levels_B);

  int parameters() const { return static_cast<int>(gram_.rows()); }
  double condition_number() const { return condition_; }

  DensityMatrixEstimate solve(const std::vector<PopulationFit>& fits) const;

  /// Forward map: displaced populations of rho for pair i (fit_A x fit_B).
  Eigen::MatrixXd predict(const CMat& rho, std::size_t i) const;

 private:
  std::vector<std::pair<cplx, cplx>> pairs_;
  std::vector<std::pair<int, int>> dims_;
  int la_, lb_;
  std::vector<CMat> KA_, KB_;  // fit x levels
  Eigen::MatrixXd gram_;
  Eigen::PartialPivLU<Eigen::MatrixXd> kkt_;
  double condition_ = 0.0;

  void rows_for(std::size_t i, Eigen::MatrixXd& rows) const;
  CMat unpack(const Eigen::VectorXd& x) const;
};

/// Raw Hermitian least-squares estimate projected to the nearest (Frobenius)
/// unit-trace positive semidefinite matrix.  `clipped` receives the sum of
/// |negative raw eigenvalues|.
CMat project_physical(const CMat& rho, double* clipped = nullptr, double* min_eig = nullptr);

struct TomographyOptions {
  std::vector<double> taus;  // empty: 0..300 ns every 2 ns
  double tail_tolerance = 1e-4;
  int extra_photons = 3;
  SimplexLsOptions fit = {};
  int threads = 1;
  /// Overrides the default radii when non-empty.
  std::vector<double> radii;

  std::vector<double> tau_grid() const;
};

/// Everything needed to simulate and invert tomography data for one
/// prepared state.
class TomographyPipeline {
 public:
  TomographyPipeline(const DeviceModel& device, const NoiseSpec& probe_noise, int levels_A,
                     int levels_B, const Eigen::Matrix3d& qubit_pops,
                     const TomographyOptions& opts = {});
  /// Reuses a probe model built by make_probe for the same levels and options.
  TomographyPipeline(ProbeModel probe, int levels_A, int levels_B,
                     const Eigen::Matrix3d& qubit_pops, const TomographyOptions& opts = {});

  static ProbeModel make_probe(const DeviceModel& device, const NoiseSpec& probe_noise,
                               int levels_A, int levels_B, const TomographyOptions& opts = {});

  /// Rebuilds the population bases for another qubit state.
  void set_qubit_populations(const Eigen::Matrix3d& qubit_pops);

  const DisplacementGrid& grid() const { return grid_; }
  const ProbeModel& probe() const { return probe_; }
  const Reconstructor& reconstructor() const { return recon_; }
  int levels_A() const { return la_; }
  int levels_B() const { return lb_; }

  /// Traces for a state given by qubit-diagonal (A, B) blocks in the
  /// resonator frame.  alpha on A is rotated by `phase_offset`.
  std::vector<TraceSet> simulate(const std::vector<CMat>& blocks, int state_levels_A,
                                 int state_levels_B, const ReadoutModel& readout, long shots,
                                 std::uint64_t seed, double phase_offset = 0.0) const;

  std::vector<PopulationFit> fit(const std::vector<TraceSet>& traces,
                                 const ReadoutModel& readout) const;

  DensityMatrixEstimate reconstruct(const std::vector<TraceSet>& traces,
                                    const ReadoutModel& readout) const;

  /// Multinomial resampling of sampled traces; fills the estimate's errors.
  void bootstrap_errors(const std::vector<TraceSet>& traces, const ReadoutModel& readout,
                        int resamples, std::uint64_t seed, DensityMatrixEstimate& est) const;

 private:
  DisplacementGrid grid_;
  std::vector<double> taus_;
  int la_, lb_;
  TomographyOptions opts_;
  std::vector<std::pair<int, int>> dims_;
  std::vector<PopulationBasis> bases_;  // per radius
  ProbeModel probe_;
  Reconstructor recon_;
};

}  // namespace noon
