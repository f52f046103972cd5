#pragma once

// Figures of merit for reconstructed two-resonator states.

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "noon/hilbert.hpp"

namespace noon {

/// <psi| rho |psi> for a normalized psi.
double fidelity(const CMat& rho, const CVec& psi);

/// Sum of |negative eigenvalues| of the partial transpose on A.
double negativity(const CMat& rho, int levels_A, int levels_B);

struct EofResult {
  double eof = 0.0;
  double concurrence = 0.0;
  /// Population inside span{|0>,|M>}_A x {|0>,|N>}_B.
  double weight = 0.0;
  bool reliable = true;  // weight >= 0.1
};

/// Entanglement of formation of the two-qubit block spanned by photon
/// numbers {0, M} on A and {0, N} on B, renormalized.
EofResult eof_effective(const CMat& rho, int levels_A, int levels_B, int M, int N);

/// Wootters concurrence of a 4x4 two-qubit density matrix.
double concurrence(const Eigen::Matrix4cd& rho);

struct DecayFit {
  double tau_D = 0.0;
  double amplitude = 0.0;
  double residual = 0.0;
  std::string element;
};

/// Least-squares fit of |value| to A exp(-t / tau_D).  Throws Error for
/// fewer than 4 points or a non-positive fitted tau_D.
DecayFit decay_fit(const std::vector<std::pair<double, cplx>>& series,
                   const std::string& element = "");

struct PhaseFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;
  std::vector<double> unwrapped;
  /// Set when a step between neighbours exceeds pi/2 before unwrapping.
  bool ambiguous = false;
};

/// Linear fit of the unwrapped phase of the series against x.
PhaseFit phase_fit(const std::vector<std::pair<double, cplx>>& series);

/// {metric, value, error, diagnostics}
nlohmann::json metric_record(const std::string& metric, double value, double error = 0.0,
                             nlohmann::json diagnostics = nlohmann::json::object());

}  // namespace noon
