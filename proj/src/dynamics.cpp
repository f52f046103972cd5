#include "noon/dynamics.hpp"

#include <algorithm>
#include <cmath>

namespace noon {

namespace {

constexpr double kTimeEps = 1e-9;

bool NoiseEmpty(const SubsystemNoise& n) {
  return n.relax_rate == 0.0 && n.dephase_rate == 0.0;
}

// Integration intervals: every breakpoint, event and sample becomes an edge.
std::vector<double> integration_edges(const PulseSchedule& schedule,
                                      std::span<const double> samples) {
  std::vector<double> edges = schedule.breakpoints();
  edges.push_back(0.0);
  for (double t : samples) edges.push_back(t);
  std::sort(edges.begin(), edges.end());
  std::vector<double> out;
  const double t_end = samples.empty() ? 0.0 : samples.back();
  for (double t : edges) {
    if (t > t_end + kTimeEps) break;
    if (out.empty() || t - out.back() > kTimeEps) out.push_back(t);
  }
  return out;
}

void check_samples(const PulseSchedule& schedule, std::span<const double> samples) {
  if (samples.empty()) throw Error("evolve: no sample times");
  for (size_t i = 0; i < samples.size(); ++i) {
    if (samples[i] < -kTimeEps || samples[i] > schedule.duration + kTimeEps)
      throw Error("evolve: sample time outside [0, duration]");
    if (i > 0 && samples[i] < samples[i - 1])
      throw Error("evolve: sample times must be sorted");
  }
}

// Full-space displacement operators for the events at time t.
std::vector<CMat> displacements_at(const PulseSchedule& schedule,
                                   const CompositeSpace& space, double t,
                                   const DisplacementOptions& opts) {
  std::vector<CMat> ops;
  for (const auto& [label, events] : schedule.displacements) {
    if (!space.contains(label)) continue;
    for (const auto& e : events)
      if (std::abs(e.time - t) <= kTimeEps)
        ops.push_back(displacement_op(space, label, e.alpha, opts).matrix);
  }
  return ops;
}

CVec phase_vector(const Eigen::VectorXd& diag, double s) {
  CVec p(diag.size());
  for (Eigen::Index i = 0; i < diag.size(); ++i) p(i) = std::polar(1.0, -diag(i) * s);
  return p;
}

// -i V(t) x where V collects exchange and drive terms.
CVec apply_offdiag(const DeviceHamiltonian& h, double t, double inside, const CVec& x) {
  CVec y = h.coupling() * x;
  for (const auto& d : h.drives(t, inside)) {
    y += (0.5 * d.omega) * ((*d.raising) * x);
    y += (0.5 * std::conj(d.omega)) * ((*d.lowering) * x);
  }
  return cplx(0.0, -1.0) * y;
}

}  // namespace

bool NoiseSpec::is_noiseless() const {
  return std::all_of(rates.begin(), rates.end(),
                     [](const auto& kv) { return NoiseEmpty(kv.second); });
}

SubsystemNoise NoiseSpec::of(const std::string& label) const {
  auto it = rates.find(label);
  return it == rates.end() ? SubsystemNoise{} : it->second;
}

NoiseSpec noise_from_device(const DeviceModel& device, double sequence_length) {
  NoiseSpec n;
  const auto tphi = sequence_tphi(device, sequence_length);
  for (const auto& [name, q] : device.qubits)
    n.rates[name] = {1.0 / q.T1, 1.0 / tphi.at(name)};
  for (const auto& [name, r] : device.resonators)
    n.rates[name] = {1.0 / r.T1, std::isinf(r.Tphi) ? 0.0 : 1.0 / r.Tphi};
  return n;
}

EvolutionResult evolve_pure(const QuantumState& initial, const DeviceModel& device,
                            const PulseSchedule& schedule,
                            std::span<const double> sample_times,
                            const EvolveOptions& opts) {
  if (!initial.is_pure()) throw Error("evolve_pure: initial state must be pure");
  check_samples(schedule, sample_times);
  const CompositeSpace& space = initial.space();
  const DeviceHamiltonian h(device, schedule, space);
  const auto edges = integration_edges(schedule, sample_times);

  EvolutionResult result;
  CVec psi = initial.vector();
  const double norm0 = psi.norm();
  size_t next_sample = 0;

  auto at_edge = [&](double t) {
    for (const auto& d : displacements_at(schedule, space, t, opts.displacement))
      psi = d * psi;
    while (next_sample < sample_times.size() &&
           std::abs(sample_times[next_sample] - t) <= kTimeEps) {
      result.times.push_back(sample_times[next_sample]);
      result.states.push_back(QuantumState::pure(space, psi));
      ++next_sample;
    }
  };

  at_edge(edges.front());
  for (size_t k = 0; k + 1 < edges.size(); ++k) {
    const double a = edges[k], b = edges[k + 1];
    const int n = std::max(1, static_cast<int>(std::ceil((b - a) / opts.dt - 1e-9)));
    const double step = (b - a) / n;
    const double mid = 0.5 * (a + b);
    if (schedule.piecewise_constant_on(a, b)) {
      const Eigen::VectorXd diag = h.diagonal(0.5 * (a + b));
      auto rhs = [&](double s, const CVec& phi) -> CVec {
        const CVec p = phase_vector(diag, s);
        const CVec x = p.cwiseProduct(phi);
        return p.conjugate().cwiseProduct(apply_offdiag(h, a + s, mid, x));
      };
      CVec phi = psi;
      double s = 0.0;
      for (int i = 0; i < n; ++i) {
        const double before = phi.squaredNorm();
        const CVec k1 = rhs(s, phi);
        const CVec k2 = rhs(s + 0.5 * step, phi + (0.5 * step) * k1);
        const CVec k3 = rhs(s + 0.5 * step, phi + (0.5 * step) * k2);
        const CVec k4 = rhs(s + step, phi + step * k3);
        phi += (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        s += step;
        result.max_step_error =
            std::max(result.max_step_error, std::abs(std::sqrt(phi.squaredNorm()) -
                                                     std::sqrt(before)));
      }
      psi = phase_vector(diag, b - a).cwiseProduct(phi);
    } else {
      auto rhs = [&](double t, const CVec& x) -> CVec {
        const Eigen::VectorXd diag = h.diagonal(t);
        return apply_offdiag(h, t, mid, x) +
               cplx(0.0, -1.0) * diag.cast<cplx>().cwiseProduct(x);
      };
      double t = a;
      for (int i = 0; i < n; ++i) {
        const double before = psi.squaredNorm();
        const CVec k1 = rhs(t, psi);
        const CVec k2 = rhs(t + 0.5 * step, psi + (0.5 * step) * k1);
        const CVec k3 = rhs(t + 0.5 * step, psi + (0.5 * step) * k2);
        const CVec k4 = rhs(t + step, psi + step * k3);
        psi += (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += step;
        result.max_step_error =
            std::max(result.max_step_error, std::abs(std::sqrt(psi.squaredNorm()) -
                                                     std::sqrt(before)));
      }
    }
    result.steps += n;
    at_edge(b);
  }
  result.drift = std::abs(psi.norm() - norm0);
  if (result.drift > opts.drift_tolerance)
    throw StepSizeError("evolve_pure: norm drift " + std::to_string(result.drift) +
                        " exceeds tolerance; reduce dt");
  return result;
}

namespace {

// A lowering operator maps each basis state to at most one other, so
// b rho b^dag is a gather: (b rho b^dag)_ij = c_i c_j rho_{k(i) k(j)}.
struct JumpMap {
  std::vector<int> src;
  std::vector<double> amp;
  double rate = 0.0;
};

JumpMap jump_map(const SpMat& b, double rate) {
  JumpMap m;
  m.src.assign(b.rows(), -1);
  m.amp.assign(b.rows(), 0.0);
  m.rate = rate;
  for (int k = 0; k < b.outerSize(); ++k)
    for (SpMat::InnerIterator it(b, k); it; ++it) {
      if (m.src[it.row()] != -1) throw Error("jump operator is not a ladder map");
      m.src[it.row()] = static_cast<int>(it.col());
      m.amp[it.row()] = it.value().real();
    }
  return m;
}

class LindbladRhs {
 public:
  LindbladRhs(const DeviceHamiltonian& h, const NoiseSpec& noise) : h_(h) {
    const CompositeSpace& space = h.space();
    const int dim = space.dim();
    w_ = Eigen::MatrixXd::Zero(dim, dim);
    for (const auto& sub : space.subsystems()) {
      const SubsystemNoise n = noise.of(sub.label);
      const Eigen::VectorXd& num = h.number(sub.label);
      if (n.relax_rate > 0.0) {
        jumps_.push_back(jump_map(h.lowering(sub.label), n.relax_rate));
        for (int j = 0; j < dim; ++j)
          for (int i = 0; i < dim; ++i) w_(i, j) -= 0.5 * n.relax_rate * (num(i) + num(j));
      }
      if (n.dephase_rate > 0.0) {
        // L = sqrt(2/Tphi) n gives -(1/Tphi)(n_i - n_j)^2 on rho_ij
        for (int j = 0; j < dim; ++j)
          for (int i = 0; i < dim; ++i) {
            const double diff = num(i) - num(j);
            w_(i, j) -= n.dephase_rate * diff * diff;
          }
      }
    }
    noisy_ = !noise.is_noiseless();
    lab_.resize(dim, dim);
    x_.resize(dim, dim);
  }

  // out = d sigma/dt.  With `p` the state is in the interaction picture of
  // diag(d) and rho_lab = (p p^dag) o sigma; without it sigma is the lab
  // state and `diag` enters through the commutator.
  void eval(double t, double inside, const CMat& sigma, const CVec* p,
            const Eigen::VectorXd* diag, CMat& out) {
    const Eigen::Index dim = sigma.rows();
    if (p) {
      for (Eigen::Index j = 0; j < dim; ++j) {
        const cplx pj = std::conj((*p)(j));
        for (Eigen::Index i = 0; i < dim; ++i) lab_(i, j) = (*p)(i) * pj * sigma(i, j);
      }
    } else {
      lab_ = sigma;
    }
    SpMat v = h_.coupling();
    for (const auto& d : h_.drives(t, inside))
      v += SpMat(0.5 * d.omega * (*d.raising)) + SpMat(0.5 * std::conj(d.omega) * (*d.lowering));
    x_.noalias() = v * lab_;
    const cplx mi(0.0, -1.0);
    for (Eigen::Index j = 0; j < dim; ++j)
      for (Eigen::Index i = 0; i < dim; ++i)
        out(i, j) = mi * (x_(i, j) - std::conj(x_(j, i)));
    if (diag) {
      for (Eigen::Index j = 0; j < dim; ++j)
        for (Eigen::Index i = 0; i < dim; ++i)
          out(i, j) += mi * ((*diag)(i) - (*diag)(j)) * lab_(i, j);
    }
    if (noisy_) {
      out += w_.cast<cplx>().cwiseProduct(lab_);
      for (const auto& jm : jumps_) {
        for (Eigen::Index j = 0; j < dim; ++j) {
          const int kj = jm.src[j];
          if (kj < 0) continue;
          const double cj = jm.rate * jm.amp[j];
          for (Eigen::Index i = 0; i < dim; ++i) {
            const int ki = jm.src[i];
            if (ki < 0) continue;
            out(i, j) += cj * jm.amp[i] * lab_(ki, kj);
          }
        }
      }
    }
    if (p) {
      for (Eigen::Index j = 0; j < dim; ++j) {
        const cplx pj = (*p)(j);
        for (Eigen::Index i = 0; i < dim; ++i) out(i, j) *= std::conj((*p)(i)) * pj;
      }
    }
  }

 private:
  const DeviceHamiltonian& h_;
  std::vector<JumpMap> jumps_;
  Eigen::MatrixXd w_;
  bool noisy_ = false;
  CMat lab_, x_;
};

double hermiticity_error(const CMat& m) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

}  // namespace

EvolutionResult evolve_lindblad(const QuantumState& initial,
                                const DeviceModel& device,
                                const PulseSchedule& schedule,
                                const NoiseSpec& noise,
                                std::span<const double> sample_times,
                                const EvolveOptions& opts) {
  initial.validate();
  check_samples(schedule, sample_times);
  const CompositeSpace& space = initial.space();
  const DeviceHamiltonian h(device, schedule, space);
  LindbladRhs rhs(h, noise);
  const auto edges = integration_edges(schedule, sample_times);
  const int dim = space.dim();

  EvolutionResult result;
  CMat rho = initial.density_matrix();
  const double trace0 = rho.trace().real();
  size_t next_sample = 0;

  auto check_state = [&](const CMat& r, bool eigen) {
    const double herm = hermiticity_error(r);
    if (herm > opts.hermiticity_tolerance)
      throw StepSizeError("evolve_lindblad: Hermiticity lost (" + std::to_string(herm) + ")");
    if (eigen) {
      Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (r + r.adjoint()),
                                             Eigen::EigenvaluesOnly);
      const double lo = es.eigenvalues().minCoeff();
      if (lo < -opts.negativity_tolerance)
        throw StepSizeError("evolve_lindblad: negative eigenvalue " + std::to_string(lo));
    }
  };

  auto at_edge = [&](double t) {
    for (const auto& d : displacements_at(schedule, space, t, opts.displacement))
      rho = d * rho * d.adjoint();
    while (next_sample < sample_times.size() &&
           std::abs(sample_times[next_sample] - t) <= kTimeEps) {
      check_state(rho, dim <= opts.full_positivity_check_dim);
      result.times.push_back(sample_times[next_sample]);
      result.states.push_back(QuantumState::density(space, rho));
      ++next_sample;
    }
  };

  CMat k1(dim, dim), k2(dim, dim), k3(dim, dim), k4(dim, dim), tmp(dim, dim);
  at_edge(edges.front());
  for (size_t k = 0; k + 1 < edges.size(); ++k) {
    const double a = edges[k], b = edges[k + 1];
    const int n = std::max(1, static_cast<int>(std::ceil((b - a) / opts.dt - 1e-9)));
    const double step = (b - a) / n;
    const double mid = 0.5 * (a + b);
    const bool constant = schedule.piecewise_constant_on(a, b);
    const Eigen::VectorXd diag = h.diagonal(0.5 * (a + b));
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      const double before = rho.trace().real();
      if (constant) {
        const CVec p0 = phase_vector(diag, s), ph = phase_vector(diag, s + 0.5 * step),
                   p1 = phase_vector(diag, s + step);
        rhs.eval(a + s, mid, rho, &p0, nullptr, k1);
        tmp.noalias() = rho + (0.5 * step) * k1;
        rhs.eval(a + s + 0.5 * step, mid, tmp, &ph, nullptr, k2);
        tmp.noalias() = rho + (0.5 * step) * k2;
        rhs.eval(a + s + 0.5 * step, mid, tmp, &ph, nullptr, k3);
        tmp.noalias() = rho + step * k3;
        rhs.eval(a + s + step, mid, tmp, &p1, nullptr, k4);
      } else {
        const Eigen::VectorXd d0 = h.diagonal(a + s), dh = h.diagonal(a + s + 0.5 * step),
                              d1 = h.diagonal(a + s + step);
        rhs.eval(a + s, mid, rho, nullptr, &d0, k1);
        tmp.noalias() = rho + (0.5 * step) * k1;
        rhs.eval(a + s + 0.5 * step, mid, tmp, nullptr, &dh, k2);
        tmp.noalias() = rho + (0.5 * step) * k2;
        rhs.eval(a + s + 0.5 * step, mid, tmp, nullptr, &dh, k3);
        tmp.noalias() = rho + step * k3;
        rhs.eval(a + s + step, mid, tmp, nullptr, &d1, k4);
      }
      rho += (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      s += step;
      result.max_step_error =
          std::max(result.max_step_error, std::abs(rho.trace().real() - before));
    }
    if (constant) {
      // back to the lab frame at b
      const CVec p = phase_vector(diag, b - a);
      for (Eigen::Index j = 0; j < dim; ++j)
        for (Eigen::Index i = 0; i < dim; ++i) rho(i, j) *= p(i) * std::conj(p(j));
    }
    result.steps += n;
    at_edge(b);
  }
  result.drift = std::abs(rho.trace().real() - trace0);
  if (result.drift > opts.drift_tolerance)
    throw StepSizeError("evolve_lindblad: trace drift " + std::to_string(result.drift) +
                        " exceeds tolerance; reduce dt");
  if (dim > opts.full_positivity_check_dim && !result.states.empty())
    check_state(result.states.back().matrix(), true);
  return result;
}

double convergence_check(const EvolutionResult& coarse, const EvolutionResult& fine) {
  if (coarse.states.size() != fine.states.size())
    throw Error("convergence_check: runs sampled at different times");
  double worst = 0.0;
  for (size_t i = 0; i < coarse.states.size(); ++i) {
    worst = std::max(worst, trace_distance(coarse.states[i].density_matrix(),
                                           fine.states[i].density_matrix()));
  }
  return worst;
}

double convergence_check(const std::function<EvolutionResult(double)>& run, double dt) {
  return convergence_check(run(dt), run(0.5 * dt));
}

}  // namespace noon
