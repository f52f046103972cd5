#include "noon/model.hpp"

#include <algorithm>
#include <cmath>

namespace noon {

namespace {

const std::vector<CouplingKey>& coupling_pairs() {
  static const std::vector<CouplingKey> pairs = {
      {"q0", "A"}, {"q0", "C"}, {"q1", "B"}, {"q1", "C"}};
  return pairs;
}

}  // namespace

void DeviceModel::validate() const {
  for (const char* r : {"A", "B", "C"}) {
    auto it = resonators.find(r);
    if (it == resonators.end()) throw Error(std::string("device: missing resonator ") + r);
    if (!(it->second.T1 > 0)) throw Error(std::string("device: T1 of ") + r + " must be positive");
    if (!(it->second.Tphi > 0)) throw Error(std::string("device: Tphi of ") + r + " must be positive");
  }
  for (const char* q : {"q0", "q1"}) {
    auto it = qubits.find(q);
    if (it == qubits.end()) throw Error(std::string("device: missing qubit ") + q);
    const auto& p = it->second;
    if (!(p.T1 > 0)) throw Error(std::string("device: T1 of ") + q + " must be positive");
    if (!(p.f_nl > 0)) throw Error(std::string("device: f_nl of ") + q + " must be positive");
    if (!(p.Tphi_short > 0) || !(p.Tphi_long > 0))
      throw Error(std::string("device: Tphi of ") + q + " must be positive");
  }
  if (g_over_pi.size() != coupling_pairs().size())
    throw Error("device: couplings must list exactly (q0,A),(q0,C),(q1,B),(q1,C)");
  for (const auto& key : coupling_pairs()) {
    auto it = g_over_pi.find(key);
    if (it == g_over_pi.end())
      throw Error("device: missing coupling " + key.first + "-" + key.second);
    if (!(it->second > 0)) throw Error("device: couplings must be positive");
  }
}

double DeviceModel::coupling(const std::string& qubit,
                             const std::string& resonator) const {
  auto it = g_over_pi.find({qubit, resonator});
  return it == g_over_pi.end() ? 0.0 : it->second;
}

double DeviceModel::coupling_rad(const std::string& qubit,
                                 const std::string& resonator) const {
  // splitting 2g/(2 pi) = g/pi  =>  g = pi * (g/pi)
  return M_PI * coupling(qubit, resonator) * 1e-3;
}

DeviceModel default_device() {
  DeviceModel d;
  d.resonators["A"] = {6.340, 3500.0, kInf};
  d.resonators["B"] = {6.286, 3300.0, kInf};
  d.resonators["C"] = {6.816, 3400.0, kInf};
  d.qubits["q0"] = {6.65, 0.200, 450.0, 300.0, 200.0};
  d.qubits["q1"] = {6.58, 0.200, 320.0, 300.0, 200.0};
  d.g_over_pi[{"q0", "A"}] = 17.8;
  d.g_over_pi[{"q0", "C"}] = 20.0;
  d.g_over_pi[{"q1", "B"}] = 17.4;
  d.g_over_pi[{"q1", "C"}] = 20.0;
  d.f_ref = 6.55;
  return d;
}

double tphi_from_ramsey(double T2, double T1) {
  if (!(T2 > 0) || !(T1 > 0)) throw Error("tphi_from_ramsey: times must be positive");
  const double rate = 1.0 / T2 - 1.0 / (2.0 * T1);
  if (!(rate > 0))
    throw Error("tphi_from_ramsey: 1/T2 <= 1/(2 T1), no pure dephasing left");
  return 1.0 / rate;
}

std::map<std::string, double> sequence_tphi(const DeviceModel& device,
                                            double sequence_length) {
  if (!(sequence_length > 0)) throw Error("sequence_tphi: length must be positive");
  std::map<std::string, double> out;
  for (const auto& [name, q] : device.qubits)
    out[name] = sequence_length <= device.tphi_crossover ? q.Tphi_short : q.Tphi_long;
  return out;
}

std::string to_string(Transition t) { return t == Transition::ge ? "ge" : "ef"; }

Transition transition_from_string(const std::string& s) {
  if (s == "ge") return Transition::ge;
  if (s == "ef") return Transition::ef;
  throw Error("unknown transition '" + s + "'");
}

double DrivePulse::envelope(double t) const {
  const double s = sigma();
  const double x = t - center;
  if (std::abs(x) > 2.0 * s) return 0.0;
  return std::exp(-x * x / (2.0 * s * s));
}

void PulseSchedule::validate() const {
  if (!(duration >= 0)) throw Error("schedule: negative duration");
  const double eps = 1e-9;
  for (const auto& [q, segs] : detuning) {
    if (!is_qubit_label(q)) throw Error("schedule: detuning on non-qubit " + q);
    std::vector<DetuningSegment> sorted = segs;
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.t_start < b.t_start; });
    for (size_t i = 0; i < sorted.size(); ++i) {
      const auto& s = sorted[i];
      if (s.t_start < -eps || s.t_end > duration + eps || s.t_end < s.t_start)
        throw Error("schedule: detuning segment outside [0, duration] on " + q);
      if (i > 0 && s.t_start < sorted[i - 1].t_end - eps)
        throw Error("schedule: overlapping detuning segments on " + q);
    }
  }
  for (const auto& [q, pulses] : drives) {
    if (!is_qubit_label(q)) throw Error("schedule: drive on non-qubit " + q);
    for (const auto& p : pulses) {
      if (!(p.fwhm > 0)) throw Error("schedule: drive FWHM must be positive");
      if (p.start() < -eps || p.end() > duration + eps)
        throw Error("schedule: drive pulse outside [0, duration] on " + q);
    }
  }
  for (const auto& [r, ds] : displacements) {
    if (!is_resonator_label(r)) throw Error("schedule: displacement on non-resonator " + r);
    for (const auto& d : ds)
      if (d.time < -eps || d.time > duration + eps)
        throw Error("schedule: displacement outside [0, duration] on " + r);
  }
}

double PulseSchedule::qubit_frequency(const DeviceModel& device,
                                      const std::string& qubit, double t) const {
  auto it = detuning.find(qubit);
  if (it != detuning.end()) {
    for (const auto& s : it->second) {
      if (t >= s.t_start && t < s.t_end) {
        if (s.f_start == s.f_end) return s.f_start;
        const double frac = (t - s.t_start) / (s.t_end - s.t_start);
        return s.f_start + frac * (s.f_end - s.f_start);
      }
    }
  }
  return device.qubits.at(qubit).f_ge_idle;
}

std::vector<double> PulseSchedule::breakpoints() const {
  std::vector<double> pts;
  auto add = [&](double t) {
    if (t > 0.0 && t < duration) pts.push_back(t);
  };
  for (const auto& [q, segs] : detuning)
    for (const auto& s : segs) { add(s.t_start); add(s.t_end); }
  for (const auto& [q, pulses] : drives)
    for (const auto& p : pulses) { add(p.start()); add(p.end()); }
  for (const auto& [r, ds] : displacements)
    for (const auto& d : ds) add(d.time);
  std::sort(pts.begin(), pts.end());
  std::vector<double> out;
  for (double t : pts)
    if (out.empty() || t - out.back() > 1e-12) out.push_back(t);
  return out;
}

bool PulseSchedule::piecewise_constant_on(double a, double b) const {
  for (const auto& [q, segs] : detuning)
    for (const auto& s : segs)
      if (s.f_start != s.f_end && s.t_start < b && s.t_end > a) return false;
  return true;
}

double qudit_level_frequency(double f_ge, double f_nl, int level) {
  return level * f_ge - f_nl * 0.5 * level * (level - 1);
}

DeviceHamiltonian::DeviceHamiltonian(const DeviceModel& device,
                                     const PulseSchedule& schedule,
                                     const CompositeSpace& space)
    : device_(device), schedule_(schedule), space_(space) {
  const int dim = space_.dim();
  static_diag_ = Eigen::VectorXd::Zero(dim);
  for (const auto& sub : space_.subsystems()) {
    const SpMat low = embed_sparse(space_, sub.label, lowering_matrix(sub.levels));
    lowering_[sub.label] = low;
    raising_[sub.label] = SpMat(low.adjoint());
    Eigen::VectorXd n(dim);
    for (int i = 0; i < dim; ++i)
      n(i) = space_.unflatten(i)[space_.index_of(sub.label)];
    number_[sub.label] = n;
    if (is_resonator_label(sub.label)) {
      const double f = device_.resonators.at(sub.label).f_r;
      static_diag_ += kTwoPi * (f - device_.f_ref) * n;
    }
  }
  coupling_ = SpMat(dim, dim);
  for (const auto& key : coupling_pairs()) {
    if (!space_.contains(key.first) || !space_.contains(key.second)) continue;
    const double g = device_.coupling_rad(key.first, key.second);
    coupling_ += g * (raising_[key.first] * lowering_[key.second] +
                      lowering_[key.first] * raising_[key.second]);
  }
  coupling_.makeCompressed();
}

Eigen::VectorXd DeviceHamiltonian::diagonal(double t) const {
  Eigen::VectorXd d = static_diag_;
  for (const auto& sub : space_.subsystems()) {
    if (!is_qubit_label(sub.label)) continue;
    const double f_ge = schedule_.qubit_frequency(device_, sub.label, t);
    const double f_nl = device_.qubits.at(sub.label).f_nl;
    const Eigen::VectorXd& n = number_.at(sub.label);
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      const int k = static_cast<int>(n(i));
      if (k == 0) continue;
      d(i) += kTwoPi * (qudit_level_frequency(f_ge, f_nl, k) - k * device_.f_ref);
    }
  }
  return d;
}

bool DeviceHamiltonian::has_drives() const {
  for (const auto& [q, pulses] : schedule_.drives)
    if (space_.contains(q) && !pulses.empty()) return true;
  return false;
}

std::vector<DeviceHamiltonian::DriveTerm> DeviceHamiltonian::drives(double t,
                                                                    double inside) const {
  std::vector<DriveTerm> out;
  for (const auto& [q, pulses] : schedule_.drives) {
    if (!space_.contains(q)) continue;
    cplx omega = 0.0;
    for (const auto& p : pulses) {
      if (inside < p.start() || inside > p.end()) continue;
      const double env = p.envelope(std::clamp(t, p.start(), p.end()));
      if (env == 0.0) continue;
      double f_c = schedule_.qubit_frequency(device_, q, p.center) +
                   p.carrier_offset_mhz * 1e-3;
      if (p.carrier == Transition::ef) f_c -= device_.qubits.at(q).f_nl;
      const double arg = -kTwoPi * (f_c - device_.f_ref) * t + p.phase;
      omega += p.amplitude * env * std::polar(1.0, arg);
    }
    if (omega != cplx(0.0))
      out.push_back({&lowering_.at(q), &raising_.at(q), omega});
  }
  return out;
}

Operator DeviceHamiltonian::dense(double t) const {
  CMat h = CMat(coupling_);
  h.diagonal() += diagonal(t).cast<cplx>();
  for (const auto& d : drives(t)) {
    h += CMat(0.5 * d.omega * (*d.raising)) +
         CMat(0.5 * std::conj(d.omega) * (*d.lowering));
  }
  return {space_, std::move(h)};
}

const SpMat& DeviceHamiltonian::lowering(const std::string& label) const {
  auto it = lowering_.find(label);
  if (it == lowering_.end()) throw Error("no subsystem " + label + " in space");
  return it->second;
}

const Eigen::VectorXd& DeviceHamiltonian::number(const std::string& label) const {
  auto it = number_.find(label);
  if (it == number_.end()) throw Error("no subsystem " + label + " in space");
  return it->second;
}

Operator hamiltonian_at(const DeviceModel& device, const PulseSchedule& schedule,
                        double t, const CompositeSpace& space) {
  if (t < 0.0 || t > schedule.duration)
    throw Error("hamiltonian_at: t outside [0, duration]");
  return DeviceHamiltonian(device, schedule, space).dense(t);
}

Eigen::VectorXd excitation_number(const CompositeSpace& space) {
  Eigen::VectorXd n(space.dim());
  for (int i = 0; i < space.dim(); ++i) {
    const auto occ = space.unflatten(i);
    int s = 0;
    for (int o : occ) s += o;
    n(i) = s;
  }
  return n;
}

CMat to_resonator_frame(const CMat& rho_ab, int levels_a, int levels_b,
                        const DeviceModel& device, double t) {
  const double wa = kTwoPi * (device.resonators.at("A").f_r - device.f_ref);
  const double wb = kTwoPi * (device.resonators.at("B").f_r - device.f_ref);
  CVec phase(levels_a * levels_b);
  for (int m = 0; m < levels_a; ++m)
    for (int n = 0; n < levels_b; ++n)
      phase(m * levels_b + n) = std::polar(1.0, (wa * m + wb * n) * t);
  return phase.asDiagonal() * rho_ab * phase.conjugate().asDiagonal();
}

}  // namespace noon
