#include "noon/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include <unsupported/Eigen/KroneckerProduct>

namespace noon {

ReadoutModel ReadoutModel::ideal() {
  ReadoutModel r;
  for (const char* q : {"q0", "q1"}) {
    r.p_e_given_g[q] = 0.0;
    r.p_g_given_e[q] = 0.0;
  }
  return r;
}

ReadoutModel ReadoutModel::typical() {
  ReadoutModel r;
  for (const char* q : {"q0", "q1"}) {
    r.p_e_given_g[q] = 0.05;
    r.p_g_given_e[q] = 0.10;
  }
  return r;
}

void ReadoutModel::validate() const {
  for (const char* q : {"q0", "q1"}) {
    for (const auto* m : {&p_e_given_g, &p_g_given_e}) {
      auto it = m->find(q);
      const double v = it == m->end() ? 0.0 : it->second;
      if (!(v >= 0.0 && v <= 1.0))
        throw Error(std::string("readout: error probability of ") + q + " outside [0, 1]");
    }
    // the confusion matrix is singular or label-swapping beyond this
    const auto eg = p_e_given_g.find(q), ge = p_g_given_e.find(q);
    const double sum = (eg == p_e_given_g.end() ? 0.0 : eg->second) +
                       (ge == p_g_given_e.end() ? 0.0 : ge->second);
    if (sum >= 1.0) throw Error(std::string("readout: error probabilities of ") + q + " sum to >= 1");
  }
}

bool ReadoutModel::is_ideal() const {
  for (const auto* m : {&p_e_given_g, &p_g_given_e})
    for (const auto& [q, v] : *m)
      if (v != 0.0) return false;
  return true;
}

Eigen::Matrix4d ReadoutModel::confusion() const {
  auto single = [&](const char* q) {
    auto get = [&](const std::map<std::string, double>& m) {
      auto it = m.find(q);
      return it == m.end() ? 0.0 : it->second;
    };
    const double eg = get(p_e_given_g), ge = get(p_g_given_e);
    Eigen::Matrix2d c;
    c << 1.0 - eg, ge,
         eg, 1.0 - ge;
    return c;
  };
  const Eigen::Matrix2d c0 = single("q0"), c1 = single("q1");
  Eigen::Matrix4d c;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y) c(2 * a + b, 2 * x + y) = c0(a, x) * c1(b, y);
  return c;
}

void TraceSet::validate() const {
  if (tau.size() != probs.size()) throw Error("trace: tau and probability lengths differ");
  if (!counts.empty() && counts.size() != tau.size())
    throw Error("trace: counts length differs from tau");
  for (const auto& p : probs) {
    double s = 0.0;
    for (double v : p) {
      if (v < -1e-12) throw Error("trace: negative probability");
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-9) throw Error("trace: probabilities do not sum to 1");
  }
}

Joint joint_probabilities(const QuantumState& state, bool f_as_excited) {
  const CompositeSpace& space = state.space();
  const int i0 = space.index_of("q0"), i1 = space.index_of("q1");
  Joint out{0, 0, 0, 0};
  const bool pure = state.is_pure();
  for (int k = 0; k < space.dim(); ++k) {
    const double p = pure ? std::norm(state.vector()(k)) : state.matrix()(k, k).real();
    const auto occ = space.unflatten(k);
    auto excited = [&](int level) { return f_as_excited ? level >= 1 : level == 1; };
    out[2 * excited(occ[i0]) + excited(occ[i1])] += p;
  }
  return out;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 finalizer over a mixed (seed, index) word
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

TraceSet sample_trace(const TraceSet& exact, long shots, std::uint64_t seed) {
  if (shots <= 0) throw Error("sample_trace: shots must be positive");
  TraceSet out = exact;
  out.shots = shots;
  out.seed = seed;
  out.counts.assign(exact.tau.size(), {0, 0, 0, 0});
  for (size_t t = 0; t < exact.tau.size(); ++t) {
    std::mt19937_64 rng(derive_seed(seed, t));
    long left = shots;
    double mass = 1.0;
    for (int k = 0; k < 3; ++k) {
      const double p = std::clamp(exact.probs[t][k] / std::max(mass, 1e-300), 0.0, 1.0);
      const long c = left > 0 ? std::binomial_distribution<long>(left, p)(rng) : 0;
      out.counts[t][k] = c;
      left -= c;
      mass -= exact.probs[t][k];
    }
    out.counts[t][3] = left;
    for (int k = 0; k < 4; ++k)
      out.probs[t][k] = static_cast<double>(out.counts[t][k]) / static_cast<double>(shots);
  }
  return out;
}

TraceSet apply_readout(const TraceSet& trace, const ReadoutModel& readout) {
  readout.validate();
  if (readout.is_ideal()) return trace;
  const Eigen::Matrix4d c = readout.confusion();
  TraceSet out = trace;
  for (auto& p : out.probs) {
    const Eigen::Vector4d v = c * Eigen::Vector4d(p[0], p[1], p[2], p[3]);
    for (int k = 0; k < 4; ++k) p[k] = v(k);
  }
  return out;
}

TraceSet correct_readout(const TraceSet& raw, const ReadoutModel& readout) {
  readout.validate();
  if (readout.is_ideal()) return raw;
  const Eigen::Matrix4d c = readout.confusion();
  Eigen::FullPivLU<Eigen::Matrix4d> lu(c);
  if (!lu.isInvertible() || std::abs(c.determinant()) < 1e-12)
    throw Error("correct_readout: confusion matrix is singular");
  const Eigen::Matrix4d inv = lu.inverse();
  TraceSet out = raw;
  out.clipped_mass = 0.0;
  out.min_corrected = 0.0;
  for (auto& p : out.probs) {
    Eigen::Vector4d v = inv * Eigen::Vector4d(p[0], p[1], p[2], p[3]);
    for (int k = 0; k < 4; ++k) {
      out.min_corrected = std::min(out.min_corrected, v(k));
      if (v(k) < 0.0) {
        out.clipped_mass += -v(k);
        v(k) = 0.0;
      }
    }
    v /= v.sum();
    for (int k = 0; k < 4; ++k) p[k] = v(k);
  }
  return out;
}

TraceSet synth_mixed_ensemble(const TraceSet& a, const TraceSet& b) {
  if (a.tau != b.tau) throw Error("synth_mixed_ensemble: tau grids differ");
  if (a.alpha != b.alpha || a.beta != b.beta)
    throw Error("synth_mixed_ensemble: displacement metadata differs");
  if (a.exact() != b.exact())
    throw Error("synth_mixed_ensemble: cannot mix exact and sampled traces");
  TraceSet out = a;
  out.shots = a.shots + b.shots;
  for (size_t t = 0; t < a.tau.size(); ++t) {
    for (int k = 0; k < 4; ++k) {
      if (!a.exact()) {
        out.counts[t][k] = a.counts[t][k] + b.counts[t][k];
        out.probs[t][k] = static_cast<double>(out.counts[t][k]) / out.shots;
      } else {
        out.probs[t][k] = 0.5 * (a.probs[t][k] + b.probs[t][k]);
      }
    }
  }
  if (!a.exact() && a.shots != b.shots) {
    // equal weights regardless of shot counts
    for (size_t t = 0; t < a.tau.size(); ++t)
      for (int k = 0; k < 4; ++k) out.probs[t][k] = 0.5 * (a.probs[t][k] + b.probs[t][k]);
  }
  out.clipped_mass = a.clipped_mass + b.clipped_mass;
  out.min_corrected = std::min(a.min_corrected, b.min_corrected);
  return out;
}

namespace {

PulseSchedule probe_schedule(const DeviceModel& device, double duration,
                             const std::vector<std::pair<std::string, std::string>>& pairs) {
  PulseSchedule s;
  s.duration = duration;
  if (duration > 0)
    for (const auto& [q, r] : pairs) {
      const double f = device.resonators.at(r).f_r;
      s.detuning[q].push_back({0.0, duration, f, f});
    }
  return s;
}

void check_taus(const std::vector<double>& taus) {
  if (taus.empty()) throw Error("probe: empty tau grid");
  for (size_t i = 0; i < taus.size(); ++i) {
    if (taus[i] < 0) throw Error("probe: negative tau");
    if (i > 0 && taus[i] <= taus[i - 1]) throw Error("probe: tau grid must increase");
  }
}

}  // namespace

TraceSet coincidence_trace(const DeviceModel& device, const QuantumState& prepared,
                           const std::vector<double>& taus, const NoiseSpec& noise,
                           long shots, const ReadoutModel& readout, std::uint64_t seed,
                           const ProbeOptions& opts) {
  if (shots < 0) throw Error("coincidence_trace: shots must be positive or 0 (exact)");
  check_taus(taus);
  const PulseSchedule s = probe_schedule(device, taus.back(), {{"q0", "A"}, {"q1", "B"}});
  EvolutionResult r;
  if (prepared.is_pure() && noise.is_noiseless())
    r = evolve_pure(prepared, device, s, taus, opts.evolve);
  else
    r = evolve_lindblad(QuantumState::density(prepared.space(), prepared.density_matrix()),
                        device, s, noise, taus, opts.evolve);
  TraceSet out;
  out.tau = taus;
  for (const auto& st : r.states) {
    Joint p = joint_probabilities(st, readout.f_as_excited);
    const double sum = p[0] + p[1] + p[2] + p[3];
    for (double& v : p) v /= sum;
    out.probs.push_back(p);
  }
  out = apply_readout(out, readout);
  if (shots > 0) out = sample_trace(out, shots, seed);
  out.seed = seed;
  return out;
}

ProbeModel::ProbeModel(const DeviceModel& device, const NoiseSpec& noise,
                       std::vector<double> taus, int photons_A, int photons_B,
                       bool f_as_excited, const ProbeOptions& opts)
    : taus_(std::move(taus)), photons_A_(photons_A), photons_B_(photons_B) {
  check_taus(taus_);
  if (photons_A < 1 || photons_B < 1) throw Error("probe: photon truncation must be >= 1");
  const std::pair<std::string, std::string> sides[2] = {{"q0", "A"}, {"q1", "B"}};
  for (int side = 0; side < 2; ++side) {
    const auto& [q, r] = sides[side];
    const int photons = side == 0 ? photons_A : photons_B;
    excited_[side] = Eigen::MatrixXd::Zero(3 * photons, taus_.size());
    const PulseSchedule s = probe_schedule(device, taus_.back(), {{q, r}});
    NoiseSpec local;
    local.rates[q] = noise.of(q);
    local.rates[r] = noise.of(r);
    for (int i = 0; i < 3; ++i) {
      for (int m = 0; m < photons; ++m) {
        // excitation number is conserved or lowered, so m + i photons suffice
        CompositeSpace space({{q, 3}, {r, std::max(2, m + i + 1)}});
        const QuantumState init = fock_state(space, std::vector<int>{i, m});
        EvolutionResult res;
        if (local.is_noiseless())
          res = evolve_pure(init, device, s, taus_, opts.evolve);
        else
          res = evolve_lindblad(QuantumState::density(space, init.density_matrix()), device,
                                s, local, taus_, opts.evolve);
        for (size_t t = 0; t < taus_.size(); ++t) {
          const CVec d = res.states[t].is_pure()
                             ? CVec(res.states[t].vector().cwiseAbs2().cast<cplx>())
                             : CVec(res.states[t].matrix().diagonal());
          double pe = 0.0;
          for (int k = 0; k < space.dim(); ++k) {
            const int level = space.unflatten(k)[0];
            if (f_as_excited ? level >= 1 : level == 1) pe += d(k).real();
          }
          excited_[side](i * photons + m, t) = pe;
        }
      }
    }
  }
}

std::vector<Joint> ProbeModel::joint(const std::vector<Eigen::VectorXd>& pop) const {
  if (pop.size() != 9) throw Error("probe: need 9 qubit-diagonal population blocks");
  std::vector<Joint> out(taus_.size(), Joint{0, 0, 0, 0});
  const int na = photons_A_, nb = photons_B_;
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) {
      const Eigen::VectorXd& v = pop[i * 3 + k];
      if (v.size() == 0 || v.cwiseAbs().maxCoeff() == 0.0) continue;
      if (v.size() != na * nb) throw Error("probe: population block has wrong size");
      const Eigen::Map<const Eigen::MatrixXd> P(v.data(), nb, na);  // P(n, m)
      for (size_t t = 0; t < taus_.size(); ++t) {
        const Eigen::VectorXd ea = excited_[0].block(i * na, t, na, 1);
        const Eigen::VectorXd eb = excited_[1].block(k * nb, t, nb, 1);
        const Eigen::VectorXd pa_e = P * ea;  // sum over m, indexed by n
        const double total = P.sum();
        const double a_e = pa_e.sum();
        const double ab_ee = pa_e.dot(eb);
        const double b_e = (P.rowwise().sum()).dot(eb);
        out[t][3] += ab_ee;
        out[t][2] += a_e - ab_ee;
        out[t][1] += b_e - ab_ee;
        out[t][0] += total - a_e - b_e + ab_ee;
      }
    }
  return out;
}

std::vector<Joint> ProbeModel::fock_trace(const Eigen::Matrix3d& qubit_pops, int m,
                                          int n) const {
  if (m >= photons_A_ || n >= photons_B_) throw TruncationError("probe: Fock index beyond truncation");
  std::vector<Joint> out(taus_.size(), Joint{0, 0, 0, 0});
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) {
      const double w = qubit_pops(i, k);
      if (w == 0.0) continue;
      for (size_t t = 0; t < taus_.size(); ++t) {
        const double a = excited_[0](i * photons_A_ + m, t);
        const double b = excited_[1](k * photons_B_ + n, t);
        out[t][0] += w * (1 - a) * (1 - b);
        out[t][1] += w * (1 - a) * b;
        out[t][2] += w * a * (1 - b);
        out[t][3] += w * a * b;
      }
    }
  return out;
}

std::vector<CMat> qubit_diagonal_blocks(const QuantumState& state) {
  const QuantumState r = partial_trace(state, {"q0", "q1", "A", "B"});
  const CompositeSpace& sp = r.space();
  const int l0 = sp.levels("q0"), l1 = sp.levels("q1");
  const int la = sp.levels("A"), lb = sp.levels("B");
  const int block = la * lb;
  const CMat& rho = r.matrix();
  std::vector<CMat> out(9, CMat::Zero(block, block));
  for (int i = 0; i < std::min(l0, 3); ++i)
    for (int k = 0; k < std::min(l1, 3); ++k) {
      const int off = (i * l1 + k) * block;
      out[i * 3 + k] = rho.block(off, off, block, block);
    }
  return out;
}

std::vector<Eigen::VectorXd> displaced_populations(const std::vector<CMat>& blocks,
                                                   int levels_A, int levels_B, cplx a,
                                                   cplx b, int photons_A, int photons_B,
                                                   double tail_tolerance) {
  if (photons_A < levels_A || photons_B < levels_B)
    throw TruncationError("displaced_populations: photon truncation below state size");
  const CMat da = displacement_matrix(photons_A, a).leftCols(levels_A);
  const CMat db = displacement_matrix(photons_B, b).leftCols(levels_B);
  for (const auto* d : {&da, &db}) {
    const double loss = 1.0 - d->colwise().squaredNorm().minCoeff();
    if (loss > tail_tolerance)
      throw TruncationError("displaced_populations: displaced state leaks " +
                            std::to_string(loss) + " beyond the photon truncation");
  }
  const CMat k = Eigen::kroneckerProduct(da, db);
  std::vector<Eigen::VectorXd> out(blocks.size());
  for (size_t i = 0; i < blocks.size(); ++i) {
    if (blocks[i].size() == 0 || blocks[i].cwiseAbs().maxCoeff() == 0.0) {
      out[i] = Eigen::VectorXd::Zero(photons_A * photons_B);
      continue;
    }
    const CMat kr = k * blocks[i];
    out[i] = (kr.cwiseProduct(k.conjugate())).rowwise().sum().real();
  }
  return out;
}

Eigen::Matrix3d qubit_populations(const QuantumState& state) {
  const QuantumState r = partial_trace(state, {"q0", "q1"});
  const int l0 = r.space().levels("q0"), l1 = r.space().levels("q1");
  Eigen::Matrix3d p = Eigen::Matrix3d::Zero();
  for (int i = 0; i < std::min(l0, 3); ++i)
    for (int k = 0; k < std::min(l1, 3); ++k) p(i, k) = r.matrix()(i * l1 + k, i * l1 + k).real();
  return p;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_csv(std::ostream& out, const std::vector<TraceSet>& traces) {
  out << "tau_ns,Pgg,Pge,Peg,Pee,shots,alpha_re,alpha_im,beta_re,beta_im,seed\n";
  for (const auto& tr : traces)
    for (size_t t = 0; t < tr.tau.size(); ++t) {
      out << fmt(tr.tau[t]);
      for (double p : tr.probs[t]) out << ',' << fmt(p);
      out << ',' << tr.shots << ',' << fmt(tr.alpha.real()) << ',' << fmt(tr.alpha.imag())
          << ',' << fmt(tr.beta.real()) << ',' << fmt(tr.beta.imag()) << ',' << tr.seed
          << '\n';
    }
}

void write_csv(std::ostream& out, const TraceSet& trace) {
  write_csv(out, std::vector<TraceSet>{trace});
}

std::vector<TraceSet> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error("read_csv: empty input");
  std::vector<TraceSet> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 11) throw Error("read_csv: expected 11 columns");
    const double tau = std::stod(cells[0]);
    Joint p{std::stod(cells[1]), std::stod(cells[2]), std::stod(cells[3]), std::stod(cells[4])};
    const long shots = std::stol(cells[5]);
    const cplx alpha(std::stod(cells[6]), std::stod(cells[7]));
    const cplx beta(std::stod(cells[8]), std::stod(cells[9]));
    const std::uint64_t seed = std::stoull(cells[10]);
    const bool same = !out.empty() && out.back().alpha == alpha && out.back().beta == beta &&
                      out.back().shots == shots && out.back().seed == seed &&
                      tau > out.back().tau.back();
    if (!same) {
      out.emplace_back();
      out.back().alpha = alpha;
      out.back().beta = beta;
      out.back().shots = shots;
      out.back().seed = seed;
    }
    TraceSet& tr = out.back();
    tr.tau.push_back(tau);
    tr.probs.push_back(p);
    if (shots > 0) {
      std::array<long, 4> c;
      for (int k = 0; k < 4; ++k) c[k] = std::lround(p[k] * shots);
      tr.counts.push_back(c);
    }
  }
  return out;
}

}  // namespace noon
