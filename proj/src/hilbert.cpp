#include "noon/hilbert.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace noon {

namespace {

constexpr double kStateTol = 1e-9;
constexpr double kEigenFloor = -1e-8;

}  // namespace

bool is_resonator_label(const std::string& label) {
  return label == "A" || label == "B" || label == "C";
}

bool is_qubit_label(const std::string& label) {
  return label == "q0" || label == "q1";
}

CompositeSpace::CompositeSpace(std::vector<SubsystemSpec> subsystems)
    : subsystems_(std::move(subsystems)) {
  if (subsystems_.empty()) throw Error("CompositeSpace: no subsystems");
  std::set<std::string> seen;
  for (const auto& s : subsystems_) {
    if (!is_resonator_label(s.label) && !is_qubit_label(s.label))
      throw Error("CompositeSpace: unknown subsystem label '" + s.label + "'");
    if (s.levels < 2)
      throw Error("CompositeSpace: subsystem " + s.label +
                  " needs at least 2 levels");
    if (!seen.insert(s.label).second)
      throw Error("CompositeSpace: duplicate label " + s.label);
  }
  strides_.assign(subsystems_.size(), 1);
  dim_ = 1;
  for (int i = static_cast<int>(subsystems_.size()) - 1; i >= 0; --i) {
    strides_[i] = dim_;
    dim_ *= subsystems_[i].levels;
  }
}

CompositeSpace CompositeSpace::device(int qubit_levels, int storage_levels,
                                      int coupler_levels) {
  return CompositeSpace({{"q0", qubit_levels},
                         {"q1", qubit_levels},
                         {"A", storage_levels},
                         {"B", storage_levels},
                         {"C", coupler_levels}});
}

bool CompositeSpace::contains(const std::string& label) const {
  return std::any_of(subsystems_.begin(), subsystems_.end(),
                     [&](const SubsystemSpec& s) { return s.label == label; });
}

int CompositeSpace::index_of(const std::string& label) const {
  for (int i = 0; i < size(); ++i)
    if (subsystems_[i].label == label) return i;
  throw Error("unknown subsystem label '" + label + "'");
}

int CompositeSpace::levels(const std::string& label) const {
  return subsystems_[index_of(label)].levels;
}

int CompositeSpace::flatten(std::span<const int> occupations) const {
  if (static_cast<int>(occupations.size()) != size())
    throw Error("flatten: occupation count does not match subsystem count");
  int flat = 0;
  for (int i = 0; i < size(); ++i) {
    if (occupations[i] < 0 || occupations[i] >= subsystems_[i].levels)
      throw TruncationError("level index " + std::to_string(occupations[i]) +
                            " out of range for subsystem " +
                            subsystems_[i].label + " with " +
                            std::to_string(subsystems_[i].levels) + " levels");
    flat += occupations[i] * strides_[i];
  }
  return flat;
}

std::vector<int> CompositeSpace::unflatten(int flat) const {
  std::vector<int> occ(subsystems_.size());
  for (int i = 0; i < size(); ++i) {
    occ[i] = (flat / strides_[i]) % subsystems_[i].levels;
  }
  return occ;
}

CompositeSpace CompositeSpace::restrict_to(
    const std::vector<std::string>& labels) const {
  std::vector<SubsystemSpec> kept;
  for (const auto& s : subsystems_)
    if (std::find(labels.begin(), labels.end(), s.label) != labels.end())
      kept.push_back(s);
  for (const auto& l : labels) index_of(l);
  return CompositeSpace(std::move(kept));
}

bool CompositeSpace::operator==(const CompositeSpace& other) const {
  if (size() != other.size()) return false;
  for (int i = 0; i < size(); ++i) {
    if (subsystems_[i].label != other.subsystems_[i].label ||
        subsystems_[i].levels != other.subsystems_[i].levels)
      return false;
  }
  return true;
}

QuantumState QuantumState::pure(CompositeSpace space, CVec psi) {
  if (psi.size() != space.dim())
    throw Error("pure state: vector length does not match space dimension");
  return QuantumState(std::move(space), std::move(psi));
}

QuantumState QuantumState::density(CompositeSpace space, CMat rho) {
  if (rho.rows() != space.dim() || rho.cols() != space.dim())
    throw Error("density state: matrix shape does not match space dimension");
  return QuantumState(std::move(space), std::move(rho));
}

const CVec& QuantumState::vector() const {
  if (!is_pure()) throw Error("state is a density matrix, not a pure state");
  return std::get<CVec>(data_);
}

const CMat& QuantumState::matrix() const {
  if (is_pure()) throw Error("state is pure, not a density matrix");
  return std::get<CMat>(data_);
}

CMat QuantumState::density_matrix() const {
  if (is_pure()) {
    const auto& v = std::get<CVec>(data_);
    return v * v.adjoint();
  }
  return std::get<CMat>(data_);
}

void QuantumState::validate() const {
  if (is_pure()) {
    const double n = vector().norm();
    if (std::abs(n - 1.0) > kStateTol)
      throw Error("pure state norm deviates from 1 by " +
                  std::to_string(std::abs(n - 1.0)));
    return;
  }
  const CMat& rho = matrix();
  const double herm = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
  if (herm > kStateTol) throw Error("density matrix is not Hermitian");
  const double tr = rho.trace().real();
  if (std::abs(tr - 1.0) > kStateTol)
    throw Error("density matrix trace deviates from 1 by " +
                std::to_string(std::abs(tr - 1.0)));
  Eigen::SelfAdjointEigenSolver<CMat> es(rho, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < kEigenFloor)
    throw Error("density matrix has a negative eigenvalue " +
                std::to_string(es.eigenvalues().minCoeff()));
}

QuantumState fock_state(const CompositeSpace& space,
                        std::span<const int> occupations) {
  CVec psi = CVec::Zero(space.dim());
  psi(space.flatten(occupations)) = 1.0;
  return QuantumState::pure(space, std::move(psi));
}

CMat lowering_matrix(int levels) {
  CMat b = CMat::Zero(levels, levels);
  for (int n = 1; n < levels; ++n) b(n - 1, n) = std::sqrt(double(n));
  return b;
}

SpMat embed_sparse(const CompositeSpace& space, const std::string& label,
                   const CMat& local) {
  const int pos = space.index_of(label);
  const int lv = space.subsystems()[pos].levels;
  if (local.rows() != lv || local.cols() != lv)
    throw Error("embed: local operator shape does not match subsystem " +
                label);
  const int stride = space.stride(pos);
  std::vector<Eigen::Triplet<cplx>> trips;
  for (int flat = 0; flat < space.dim(); ++flat) {
    const int col_level = (flat / stride) % lv;
    const int base = flat - col_level * stride;
    for (int row_level = 0; row_level < lv; ++row_level) {
      const cplx v = local(row_level, col_level);
      if (v != cplx(0.0)) trips.emplace_back(base + row_level * stride, flat, v);
    }
  }
  SpMat out(space.dim(), space.dim());
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

LadderPair ladder_ops(const CompositeSpace& space, const std::string& label) {
  const SpMat low = embed_sparse(space, label, lowering_matrix(space.levels(label)));
  CMat lowering = CMat(low);
  CMat raising = lowering.adjoint();
  return {{space, std::move(lowering)}, {space, std::move(raising)}};
}

CMat displacement_matrix(int levels, cplx alpha, int guard_levels) {
  if (alpha == cplx(0.0)) return CMat::Identity(levels, levels);
  const int ext = levels + guard_levels;
  const CMat b = lowering_matrix(ext);
  // alpha b^dag - conj(alpha) b = i K with K Hermitian.
  const CMat gen = alpha * b.adjoint() - std::conj(alpha) * b;
  const CMat k = cplx(0.0, -1.0) * gen;
  Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (k + k.adjoint()));
  const CVec phases =
      (cplx(0.0, 1.0) * es.eigenvalues().cast<cplx>()).array().exp().matrix();
  const CMat full = es.eigenvectors() * phases.asDiagonal() *
                    es.eigenvectors().adjoint();
  return full.topLeftCorner(levels, levels);
}

double displacement_guard_population(int levels, cplx alpha, int guard_levels) {
  const CMat d = displacement_matrix(levels, alpha, guard_levels);
  double top = 0.0;
  for (int n = std::max(0, levels - 2); n < levels; ++n) top += std::norm(d(n, 0));
  return top;
}

Operator displacement_op(const CompositeSpace& space, const std::string& label,
                         cplx alpha, const DisplacementOptions& opts) {
  if (!is_resonator_label(label))
    throw Error("displacement_op: '" + label + "' is not a resonator");
  const int lv = space.levels(label);
  if (std::abs(alpha) > opts.max_amplitude)
    throw TruncationError("displacement amplitude " +
                          std::to_string(std::abs(alpha)) +
                          " exceeds configured maximum");
  if (alpha == cplx(0.0))
    return {space, CMat::Identity(space.dim(), space.dim())};
  const double top = displacement_guard_population(lv, alpha, opts.guard_levels);
  if (top >= opts.guard_tolerance)
    throw TruncationError(
        "displacement |alpha|=" + std::to_string(std::abs(alpha)) +
        " leaves population " + std::to_string(top) +
        " on the top two levels of resonator " + label + " (" +
        std::to_string(lv) + " levels)");
  // exponential of the truncated generator, unitary on the retained levels
  const CMat local = displacement_matrix(lv, alpha, 0);
  return {space, CMat(embed_sparse(space, label, local))};
}

namespace {

// Reduced density matrix of `rho` (over `space`) on the positions in `keep`.
CMat trace_out(const CompositeSpace& space, const CMat& rho,
               const std::vector<int>& keep_pos, const CompositeSpace& kept) {
  const int n = space.size();
  std::vector<int> drop_pos;
  for (int i = 0; i < n; ++i)
    if (std::find(keep_pos.begin(), keep_pos.end(), i) == keep_pos.end())
      drop_pos.push_back(i);
  int drop_dim = 1;
  for (int p : drop_pos) drop_dim *= space.subsystems()[p].levels;

  // flat index in the full space for (kept multi-index, dropped multi-index)
  std::vector<int> kept_offset(kept.dim()), drop_offset(drop_dim);
  for (int k = 0; k < kept.dim(); ++k) {
    const auto occ = kept.unflatten(k);
    int off = 0;
    for (size_t j = 0; j < keep_pos.size(); ++j)
      off += occ[j] * space.stride(keep_pos[j]);
    kept_offset[k] = off;
  }
  for (int d = 0; d < drop_dim; ++d) {
    int rem = d, off = 0;
    for (int j = static_cast<int>(drop_pos.size()) - 1; j >= 0; --j) {
      const int lv = space.subsystems()[drop_pos[j]].levels;
      off += (rem % lv) * space.stride(drop_pos[j]);
      rem /= lv;
    }
    drop_offset[d] = off;
  }
  CMat out = CMat::Zero(kept.dim(), kept.dim());
  for (int i = 0; i < kept.dim(); ++i)
    for (int j = 0; j < kept.dim(); ++j) {
      cplx acc = 0.0;
      for (int d = 0; d < drop_dim; ++d)
        acc += rho(kept_offset[i] + drop_offset[d], kept_offset[j] + drop_offset[d]);
      out(i, j) = acc;
    }
  return out;
}

}  // namespace

QuantumState partial_trace(const QuantumState& state,
                           const std::vector<std::string>& keep) {
  if (keep.empty()) throw Error("partial_trace: empty keep list");
  const CompositeSpace& space = state.space();
  const CompositeSpace kept = space.restrict_to(keep);
  std::vector<int> keep_pos;
  for (const auto& s : kept.subsystems()) keep_pos.push_back(space.index_of(s.label));
  if (kept.size() == space.size()) return QuantumState::density(space, state.density_matrix());
  return QuantumState::density(kept,
                               trace_out(space, state.density_matrix(), keep_pos, kept));
}

CMat partial_transpose_matrix(const CMat& rho, int dim_a, int dim_b,
                              bool transpose_first) {
  CMat out(rho.rows(), rho.cols());
  for (int i = 0; i < dim_a; ++i)
    for (int k = 0; k < dim_b; ++k)
      for (int j = 0; j < dim_a; ++j)
        for (int l = 0; l < dim_b; ++l) {
          const cplx v = rho(i * dim_b + k, j * dim_b + l);
          if (transpose_first)
            out(j * dim_b + k, i * dim_b + l) = v;
          else
            out(i * dim_b + l, j * dim_b + k) = v;
        }
  return out;
}

Operator partial_transpose(const QuantumState& rho, const std::string& which) {
  if (rho.is_pure()) throw Error("partial_transpose: expects a density matrix");
  const CompositeSpace& space = rho.space();
  if (space.size() != 2)
    throw Error("partial_transpose: state must live on exactly two subsystems");
  const int pos = space.index_of(which);
  const int da = space.subsystems()[0].levels;
  const int db = space.subsystems()[1].levels;
  return {space, partial_transpose_matrix(rho.matrix(), da, db, pos == 0)};
}

QuantumState tensor(const QuantumState& a, const QuantumState& b) {
  std::vector<SubsystemSpec> subs = a.space().subsystems();
  for (const auto& s : b.space().subsystems()) subs.push_back(s);
  CompositeSpace space(std::move(subs));
  if (a.is_pure() && b.is_pure()) {
    const CVec& va = a.vector();
    const CVec& vb = b.vector();
    CVec out(va.size() * vb.size());
    for (Eigen::Index i = 0; i < va.size(); ++i)
      out.segment(i * vb.size(), vb.size()) = va(i) * vb;
    return QuantumState::pure(std::move(space), std::move(out));
  }
  const CMat ra = a.density_matrix();
  const CMat rb = b.density_matrix();
  CMat out(ra.rows() * rb.rows(), ra.cols() * rb.cols());
  for (Eigen::Index i = 0; i < ra.rows(); ++i)
    for (Eigen::Index j = 0; j < ra.cols(); ++j)
      out.block(i * rb.rows(), j * rb.cols(), rb.rows(), rb.cols()) = ra(i, j) * rb;
  return QuantumState::density(std::move(space), std::move(out));
}

double trace_distance(const CMat& a, const CMat& b) {
  const CMat d = a - b;
  Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (d + d.adjoint()),
                                         Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

}  // namespace noon
