#pragma once

// Truncated tensor-product spaces of qudits and resonator modes, and the
// dense operator algebra the rest of the toolkit is written against.

#include <complex>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace noon {

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using SpMat = Eigen::SparseMatrix<cplx>;

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A requested level, photon number or displacement does not fit the
/// configured truncation.
class TruncationError : public Error {
 public:
  using Error::Error;
};

struct SubsystemSpec {
  std::string label;
  int levels = 2;
};

/// Ordered tensor product of qudits / truncated modes.  The first listed
/// subsystem is the most significant index of the flattened basis.
class CompositeSpace {
 public:
  CompositeSpace() = default;
  explicit CompositeSpace(std::vector<SubsystemSpec> subsystems);

  /// Full device ordering (q0, q1, A, B, C).
  static CompositeSpace device(int qubit_levels, int storage_levels,
                               int coupler_levels);

  const std::vector<SubsystemSpec>& subsystems() const { return subsystems_; }
  int dim() const { return dim_; }
  int size() const { return static_cast<int>(subsystems_.size()); }

  bool contains(const std::string& label) const;
  /// Position of `label`; throws Error on unknown labels.
  int index_of(const std::string& label) const;
  int levels(const std::string& label) const;
  int stride(int position) const { return strides_[position]; }

  int flatten(std::span<const int> occupations) const;
  std::vector<int> unflatten(int flat) const;

  /// Sub-space made of the listed labels, kept in this space's ordering.
  CompositeSpace restrict_to(const std::vector<std::string>& labels) const;

  bool operator==(const CompositeSpace& other) const;

 private:
  std::vector<SubsystemSpec> subsystems_;
  std::vector<int> strides_;
  int dim_ = 1;
};

struct Operator {
  CompositeSpace space;
  CMat matrix;
};

/// Pure state vector or density matrix over a CompositeSpace.
class QuantumState {
 public:
  static QuantumState pure(CompositeSpace space, CVec psi);
  static QuantumState density(CompositeSpace space, CMat rho);

  const CompositeSpace& space() const { return space_; }
  bool is_pure() const { return std::holds_alternative<CVec>(data_); }
  const CVec& vector() const;
  const CMat& matrix() const;
  /// Density matrix view; computes |psi><psi| for pure states.
  CMat density_matrix() const;

  /// Throws Error if the state violates the norm / Hermiticity / trace /
  /// positivity tolerances.
  void validate() const;

 private:
  QuantumState(CompositeSpace space, std::variant<CVec, CMat> data)
      : space_(std::move(space)), data_(std::move(data)) {}
  CompositeSpace space_;
  std::variant<CVec, CMat> data_;
};

QuantumState fock_state(const CompositeSpace& space,
                        std::span<const int> occupations);

struct LadderPair {
  Operator lowering;
  Operator raising;
};

/// Truncated harmonic-oscillator lowering/raising operators of `label`
/// embedded in the full space.
LadderPair ladder_ops(const CompositeSpace& space, const std::string& label);

/// Sparse embedding of a single-factor matrix (identity elsewhere).
SpMat embed_sparse(const CompositeSpace& space, const std::string& label,
                   const CMat& local);

/// Single-mode lowering operator on `levels` levels.
CMat lowering_matrix(int levels);

struct DisplacementOptions {
  double max_amplitude = 2.0;
  int guard_levels = 6;
  /// Allowed population of D(alpha)|0> on the top two retained levels.
  double guard_tolerance = 1e-4;
};

/// exp(alpha b^dag - conj(alpha) b) on a `levels`-level mode, computed on a
/// guard-extended truncation and cropped.  No guard test is applied.
CMat displacement_matrix(int levels, cplx alpha, int guard_levels = 6);

/// Population of D(alpha)|0> on the top two of `levels` retained levels.
double displacement_guard_population(int levels, cplx alpha,
                                     int guard_levels = 6);

/// Displacement on the resonator `label` (one of A, B, C) embedded in the
/// full space, as the exponential of the truncated generator (exactly
/// unitary).  Throws TruncationError when the guard test fails.
Operator displacement_op(const CompositeSpace& space, const std::string& label,
                         cplx alpha, const DisplacementOptions& opts = {});

QuantumState partial_trace(const QuantumState& state,
                           const std::vector<std::string>& keep);

/// Transpose on the tensor factor `which` of a two-subsystem density matrix.
Operator partial_transpose(const QuantumState& rho, const std::string& which);

/// Raw matrix form of the above for a (dim_a*dim_b) square matrix.
CMat partial_transpose_matrix(const CMat& rho, int dim_a, int dim_b,
                              bool transpose_first);

QuantumState tensor(const QuantumState& a, const QuantumState& b);

/// Trace distance 0.5 * ||a - b||_1 for Hermitian a, b.
double trace_distance(const CMat& a, const CMat& b);

bool is_resonator_label(const std::string& label);
bool is_qubit_label(const std::string& label);

}  // namespace noon
