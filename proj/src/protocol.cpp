#include "noon/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "noon/dynamics.hpp"

namespace noon {

namespace {

constexpr double kGolden = 0.6180339887498949;

// Maximizes f on [lo, hi]; f assumed unimodal there.
std::pair<double, double> golden_max(const std::function<double(double)>& f, double lo,
                                     double hi, double tol) {
  double a = lo, b = hi;
  double c = b - kGolden * (b - a), d = a + kGolden * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc > fd) {
      b = d; d = c; fd = fc;
      c = b - kGolden * (b - a); fc = f(c);
    } else {
      a = c; c = d; fc = fd;
      d = a + kGolden * (b - a); fd = f(d);
    }
  }
  return fc > fd ? std::pair{c, fc} : std::pair{d, fd};
}

double resonance_point(const DeviceModel& device, const std::string& qubit,
                       const std::string& resonator, Transition t) {
  const double f = device.resonators.at(resonator).f_r;
  return t == Transition::ef ? f + device.qubits.at(qubit).f_nl : f;
}

struct SwapScan {
  double transfer = 0.0;
  double time = 0.0;
};

// Transfer probability vs time at one detuning offset; returns the peak,
// refined by a parabola through the three best samples.
SwapScan scan_swap_time(const DeviceModel& device, const std::string& qubit,
                        const std::string& resonator, Transition transition, int n,
                        double offset_mhz, double t_max, double dt) {
  CompositeSpace space({{qubit, 3}, {resonator, n + 2}});
  const int x = transition == Transition::ge ? 1 : 2;
  std::vector<int> occ_in{x, n - 1}, occ_out{x - 1, n};
  PulseSchedule s;
  s.duration = t_max;
  const double f = resonance_point(device, qubit, resonator, transition) + offset_mhz * 1e-3;
  s.detuning[qubit].push_back({0.0, t_max, f, f});
  const int steps = static_cast<int>(std::ceil(t_max / dt));
  std::vector<double> times(steps + 1);
  for (int i = 0; i <= steps; ++i) times[i] = std::min(t_max, i * dt);
  EvolveOptions opts;
  opts.dt = dt;
  const auto res = evolve_pure(fock_state(space, occ_in), device, s, times, opts);
  const int target = space.flatten(occ_out);
  std::vector<double> p(times.size());
  for (size_t i = 0; i < times.size(); ++i)
    p[i] = std::norm(res.states[i].vector()(target));
  const size_t k = std::max_element(p.begin(), p.end()) - p.begin();
  SwapScan out{p[k], times[k]};
  if (k > 0 && k + 1 < p.size()) {
    const double denom = p[k - 1] - 2.0 * p[k] + p[k + 1];
    if (denom < 0.0) {
      const double shift = 0.5 * (p[k - 1] - p[k + 1]) / denom;
      out.time = times[k] + shift * (times[k + 1] - times[k]);
      out.transfer = p[k] - 0.25 * (p[k - 1] - p[k + 1]) * shift;
    }
  }
  return out;
}

struct PiResult {
  double transfer;
  double leakage;
};

PiResult run_pi(const DeviceModel& device, const std::string& qubit, Transition tr,
                double amplitude, double offset_mhz, double fwhm, double dt) {
  CompositeSpace space({{qubit, 3}});
  DrivePulse p;
  p.fwhm = fwhm;
  p.center = 2.0 * p.sigma();
  p.amplitude = amplitude;
  p.carrier = tr;
  p.carrier_offset_mhz = offset_mhz;
  PulseSchedule s;
  s.duration = 4.0 * p.sigma();
  s.drives[qubit].push_back(p);
  const int from = tr == Transition::ge ? 0 : 1;
  std::vector<double> times{s.duration};
  EvolveOptions opts;
  opts.dt = dt;
  const auto res = evolve_pure(fock_state(space, std::vector<int>{from}), device, s,
                               times, opts);
  const CVec& psi = res.states.back().vector();
  const double pt = std::norm(psi(from + 1));
  return {pt, 1.0 - pt - std::norm(psi(from))};
}

}  // namespace

std::string describe(const SwapKey& key) {
  return key.qubit + "-" + key.resonator + " " + to_string(key.transition) + " n=" +
         std::to_string(key.n);
}

const SwapCalibration& CalibrationTable::swap(const SwapKey& key) const {
  auto it = swaps.find(key);
  if (it == swaps.end()) throw Error("calibration table has no swap " + describe(key));
  return it->second;
}

const PiCalibration& CalibrationTable::pi(const std::string& qubit, Transition t) const {
  auto it = pi_pulses.find({qubit, t});
  if (it == pi_pulses.end())
    throw Error("calibration table has no " + to_string(t) + " pi pulse for " + qubit);
  return it->second;
}

std::string to_string(ProtocolKind k) {
  switch (k) {
    case ProtocolKind::noon: return "NOON";
    case ProtocolKind::moon: return "MOON";
    case ProtocolKind::bell: return "Bell";
    case ProtocolKind::product_benchmark: return "product_benchmark";
    case ProtocolKind::eigenstate_benchmark: return "eigenstate_benchmark";
    case ProtocolKind::mixed_component: return "mixed_component";
  }
  return "?";
}

ProtocolKind protocol_kind_from_string(const std::string& s) {
  for (auto k : {ProtocolKind::noon, ProtocolKind::moon, ProtocolKind::bell,
                 ProtocolKind::product_benchmark, ProtocolKind::eigenstate_benchmark,
                 ProtocolKind::mixed_component}) {
    std::string name = to_string(k);
    std::string lower = name, in = s;
    std::transform(lower.begin(), lower.end(), lower.begin(), ::tolower);
    std::transform(in.begin(), in.end(), in.begin(), ::tolower);
    if (in == lower) return k;
  }
  throw Error("unknown protocol kind '" + s + "'");
}

std::string to_string(PhaseMethod m) {
  switch (m) {
    case PhaseMethod::none: return "none";
    case PhaseMethod::delay: return "delay";
    case PhaseMethod::displacement: return "displacement";
  }
  return "?";
}

PhaseMethod phase_method_from_string(const std::string& s) {
  if (s == "none") return PhaseMethod::none;
  if (s == "delay" || s == "1") return PhaseMethod::delay;
  if (s == "displacement" || s == "2") return PhaseMethod::displacement;
  throw Error("unknown phase method '" + s + "'");
}

void ProtocolSpec::validate() const {
  if (N < 1) throw Error("protocol: N must be >= 1");
  if (kind == ProtocolKind::moon && !(M > N))
    throw Error("protocol: MOON requires M > N >= 1");
  if (kind == ProtocolKind::mixed_component && mixed_side != "A" && mixed_side != "B")
    throw Error("protocol: mixed_side must be A or B");
  if (phase_method == PhaseMethod::delay && (kind != ProtocolKind::noon || N != 1))
    throw Error("protocol: delay phase method needs an N=1 NOON state");
  if (delay_before_transfer < 0) throw Error("protocol: negative delay");
}

int ProtocolSpec::levels_A() const {
  switch (kind) {
    case ProtocolKind::noon: return N + 1;
    case ProtocolKind::moon: return M + 1;
    case ProtocolKind::eigenstate_benchmark: return 3;
    default: return 2;
  }
}

int ProtocolSpec::levels_B() const {
  return kind == ProtocolKind::noon || kind == ProtocolKind::moon ? N + 1 : 2;
}

double analytic_swap_time(const DeviceModel& device, const std::string& qubit,
                          const std::string& resonator, Transition transition, int n) {
  const double g = device.coupling(qubit, resonator) * 1e-3;  // GHz, g/pi
  const double factor = std::sqrt(static_cast<double>(n)) *
                        (transition == Transition::ef ? std::sqrt(2.0) : 1.0);
  return 1.0 / (2.0 * factor * g);
}

SwapCalibration calibrate_swap(const DeviceModel& device, const std::string& qubit,
                               const std::string& resonator, Transition transition,
                               int n, const CalibrationOptions& opts) {
  if (n < 1) throw Error("calibrate_swap: n must be >= 1");
  if (device.coupling(qubit, resonator) <= 0)
    throw Error("calibrate_swap: " + qubit + " and " + resonator + " are not coupled");
  const double t_max = 1.5 * analytic_swap_time(device, qubit, resonator, transition, n);
  auto eval = [&](double off) {
    return scan_swap_time(device, qubit, resonator, transition, n, off, t_max, opts.dt);
  };
  const double step = 0.5;
  double best_off = 0.0, best_p = -1.0;
  for (double off = -opts.max_offset_mhz; off <= opts.max_offset_mhz + 1e-9; off += step) {
    const double p = eval(off).transfer;
    if (p > best_p) { best_p = p; best_off = off; }
  }
  const auto [off, p] = golden_max([&](double o) { return eval(o).transfer; },
                                   best_off - step, best_off + step, 1e-3);
  const SwapScan final = eval(off);
  if (final.transfer < opts.min_transfer)
    throw Error("calibrate_swap: " + describe({qubit, resonator, transition, n}) +
                " reached only " + std::to_string(final.transfer));
  (void)p;
  return {final.time, off, final.transfer};
}

PiCalibration calibrate_pi(const DeviceModel& device, const std::string& qubit,
                           Transition transition, const CalibrationOptions& opts) {
  const double sigma = opts.pi_fwhm / 2.354820045030949;
  // area pi for the ge matrix element 1 (ef: sqrt 2), truncated Gaussian
  const double area = sigma * std::sqrt(kTwoPi) * std::erf(2.0 / std::sqrt(2.0));
  double amp = M_PI / area / (transition == Transition::ef ? std::sqrt(2.0) : 1.0);
  double off = 0.0;
  auto P = [&](double a, double o) {
    return run_pi(device, qubit, transition, a, o, opts.pi_fwhm, opts.dt).transfer;
  };
  double best = -1.0;
  for (double o = -10.0; o <= 10.0; o += 1.0) {
    const double p = P(amp, o);
    if (p > best) { best = p; off = o; }
  }
  for (int pass = 0; pass < 4; ++pass) {
    const double span_a = 0.05 * amp / (1 << pass);
    amp = golden_max([&](double a) { return P(a, off); }, amp - span_a, amp + span_a,
                     1e-6).first;
    const double span_o = 2.0 / (1 << pass);
    off = golden_max([&](double o) { return P(amp, o); }, off - span_o, off + span_o,
                     1e-4).first;
  }
  const PiResult r = run_pi(device, qubit, transition, amp, off, opts.pi_fwhm, opts.dt);
  return {amp, off, r.transfer, r.leakage};
}

std::vector<SwapKey> required_swaps(const ProtocolSpec& spec) {
  std::vector<SwapKey> keys;
  auto ladder = [&](const std::string& q, const std::string& r, int photons) {
    for (int k = 1; k < photons; ++k) keys.push_back({q, r, Transition::ef, k});
    keys.push_back({q, r, Transition::ge, photons});
  };
  const SwapKey c0{"q0", "C", Transition::ge, 1}, c1{"q1", "C", Transition::ge, 1};
  switch (spec.kind) {
    case ProtocolKind::noon:
      keys = {c0, c1};
      ladder("q0", "A", spec.N);
      ladder("q1", "B", spec.N);
      break;
    case ProtocolKind::moon:
      keys = {c0, c1};
      ladder("q0", "A", spec.M);
      ladder("q1", "B", spec.N);
      break;
    case ProtocolKind::bell:
      keys = {c0, c1};
      break;
    case ProtocolKind::eigenstate_benchmark:
      keys = {{"q0", "A", Transition::ge, 1}, {"q0", "A", Transition::ge, 2}};
      break;
    case ProtocolKind::product_benchmark:
      keys = {{"q0", "A", Transition::ge, 1}, {"q1", "B", Transition::ge, 1}};
      break;
    case ProtocolKind::mixed_component:
      keys = {spec.mixed_side == "A" ? SwapKey{"q0", "A", Transition::ge, 1}
                                     : SwapKey{"q1", "B", Transition::ge, 1}};
      break;
  }
  return keys;
}

std::vector<std::pair<std::string, Transition>> required_pulses(const ProtocolSpec& spec) {
  using P = std::pair<std::string, Transition>;
  switch (spec.kind) {
    case ProtocolKind::noon:
    case ProtocolKind::moon: {
      std::vector<P> out{{"q0", Transition::ge}};
      const int top = spec.kind == ProtocolKind::moon ? spec.M : spec.N;
      if (top > 1) out.push_back({"q0", Transition::ef});
      if (spec.N > 1) out.push_back({"q1", Transition::ef});
      return out;
    }
    case ProtocolKind::bell:
    case ProtocolKind::eigenstate_benchmark:
      return {{"q0", Transition::ge}};
    case ProtocolKind::product_benchmark:
      return {{"q0", Transition::ge}, {"q1", Transition::ge}};
    case ProtocolKind::mixed_component:
      return {{spec.mixed_side == "A" ? "q0" : "q1", Transition::ge}};
  }
  return {};
}

CalibrationTable calibrate_for(const DeviceModel& device, const ProtocolSpec& spec,
                               CalibrationTable table, const CalibrationOptions& opts) {
  for (const auto& key : required_swaps(spec))
    if (!table.swaps.count(key))
      table.swaps[key] =
          calibrate_swap(device, key.qubit, key.resonator, key.transition, key.n, opts);
  for (const auto& [q, t] : required_pulses(spec))
    if (!table.pi_pulses.count({q, t})) table.pi_pulses[{q, t}] = calibrate_pi(device, q, t, opts);
  return table;
}

namespace {

bool tunable(const ProtocolSpec& spec) {
  return spec.kind == ProtocolKind::noon || spec.kind == ProtocolKind::moon;
}

}  // namespace

double generation_fidelity(const DeviceModel& device, const CalibrationTable& calib,
                           const ProtocolSpec& spec) {
  if (!tunable(spec)) throw Error("generation_fidelity: only NOON and MOON specs have a target");
  ProtocolSpec plain = spec;
  plain.phase_method = PhaseMethod::none;
  const PulseSchedule s = compile(device, calib, plain);
  const CompositeSpace space = generation_space(plain);
  const QuantumState out =
      evolve_pure(fock_state(space, std::vector<int>(space.subsystems().size(), 0)), device, s,
                  std::vector<double>{s.duration})
          .states.back();
  const int la = plain.levels_A(), lb = plain.levels_B();
  const CMat rho =
      to_resonator_frame(partial_trace(out, {"A", "B"}).matrix(), la, lb, device, s.duration);
  const int M = plain.kind == ProtocolKind::moon ? plain.M : plain.N;
  const CVec t = noon_target(M, plain.N, la, lb, std::arg(rho(plain.N, M * lb)));
  return (t.adjoint() * rho * t)(0, 0).real();
}

SequenceTuning tune_in_sequence(const DeviceModel& device, const ProtocolSpec& spec,
                                CalibrationTable table, const CalibrationOptions& opts) {
  SequenceTuning out;
  if (!tunable(spec) || opts.sequence_passes <= 0) {
    out.table = std::move(table);
    return out;
  }
  // only entries this spec uses, so the search space stays small
  CalibrationTable t;
  for (const auto& key : required_swaps(spec)) t.swaps[key] = table.swap(key);
  for (const auto& [q, tr] : required_pulses(spec)) t.pi_pulses[{q, tr}] = table.pi(q, tr);

  double best = generation_fidelity(device, t, spec);
  out.fidelity_before = best;
  out.evaluations = 1;
  auto descend = [&](double& x, double step, double floor) {
    for (int it = 0; it < 12 && step >= floor; ++it) {
      const double x0 = x;
      bool moved = false;
      for (double dx : {step, -step}) {
        x = x0 + dx;
        const double f = generation_fidelity(device, t, spec);
        ++out.evaluations;
        if (f > best) {
          best = f;
          moved = true;
          break;
        }
      }
      if (!moved) {
        x = x0;
        step *= 0.5;
      }
    }
  };
  for (int pass = 0; pass < opts.sequence_passes; ++pass) {
    const double shrink = 1.0 / (1 << pass);
    for (auto& [k, c] : t.pi_pulses) descend(c.amplitude, 0.01 * c.amplitude * shrink, 1e-5 * c.amplitude);
    for (auto& [k, c] : t.swaps) {
      descend(c.duration, 0.5 * shrink, 0.02);
      descend(c.detuning_offset_mhz, 1.0 * shrink, 0.02);
    }
  }
  for (const auto& [k, c] : t.swaps) table.swaps[k] = c;
  for (const auto& [k, c] : t.pi_pulses) table.pi_pulses[k] = c;
  out.table = std::move(table);
  out.fidelity_after = best;
  return out;
}

namespace {

// Builds a schedule step by step with a running time cursor.
class Builder {
 public:
  Builder(const DeviceModel& device, const CalibrationTable& calib,
          const CompileOptions& opts)
      : device_(device), calib_(calib), opts_(opts) {}

  void pi(const std::vector<std::string>& qubits, Transition tr, double fraction,
          const std::string& label) {
    DrivePulse p;
    p.fwhm = opts_.pi_fwhm;
    const double width = 4.0 * p.sigma();
    p.center = cursor_ + 0.5 * width;
    for (const auto& q : qubits) {
      const PiCalibration& c = calib_.pi(q, tr);
      p.amplitude = fraction * c.amplitude;
      p.carrier = tr;
      p.carrier_offset_mhz = c.carrier_offset_mhz;
      s_.drives[q].push_back(p);
    }
    add_step(label, qubits, cursor_, cursor_ + width);
    cursor_ += width + opts_.buffer;
  }

  // Simultaneous (or sequential) swaps; `fraction` of the iSWAP duration.
  void swap(const std::vector<SwapKey>& keys, double fraction, const std::string& label,
            bool sequential) {
    const double start = cursor_;
    double end = cursor_;
    std::vector<std::string> qubits;
    double t0 = cursor_;
    for (const auto& key : keys) {
      const SwapCalibration& c = calib_.swap(key);
      const double f = resonance_point(device_, key.qubit, key.resonator, key.transition) +
                       c.detuning_offset_mhz * 1e-3;
      const double T = fraction * c.duration;
      s_.detuning[key.qubit].push_back({t0, t0 + T, f, f});
      end = std::max(end, t0 + T);
      if (sequential) t0 = t0 + T + opts_.buffer;
      qubits.push_back(key.qubit);
    }
    add_step(label, qubits, start, end);
    cursor_ = end + opts_.buffer;
  }

  PulseSchedule finish() {
    s_.duration = cursor_;
    s_.validate();
    return s_;
  }

 private:
  void add_step(const std::string& label, const std::vector<std::string>& qubits,
                double a, double b) {
    s_.steps.push_back({label, qubits.size() == 1 ? qubits[0] : "both", a, b});
  }

  const DeviceModel& device_;
  const CalibrationTable& calib_;
  CompileOptions opts_;
  PulseSchedule s_;
  double cursor_ = 0.0;
};

void bell_steps(Builder& b) {
  b.pi({"q0"}, Transition::ge, 1.0, "pi_ge");
  b.swap({{"q0", "C", Transition::ge, 1}}, 0.5, "sqrt_iswap_C", false);
  b.swap({{"q1", "C", Transition::ge, 1}}, 1.0, "iswap_C", false);
}

}  // namespace

PulseSchedule compile_bell(const DeviceModel& device, const CalibrationTable& calib,
                           const CompileOptions& opts) {
  Builder b(device, calib, opts);
  bell_steps(b);
  return b.finish();
}

PulseSchedule compile_moon(const DeviceModel& device, const CalibrationTable& calib,
                           int M, int N, const CompileOptions& opts, bool sequential) {
  if (N < 1 || M < N) throw Error("compile: need M >= N >= 1");
  Builder b(device, calib, opts);
  bell_steps(b);
  for (int k = 1; k < N; ++k) {
    b.pi({"q0", "q1"}, Transition::ef, 1.0, "pi_ef");
    b.swap({{"q0", "A", Transition::ef, k}, {"q1", "B", Transition::ef, k}}, 1.0,
           "iswap_ef", sequential);
  }
  for (int k = N; k < M; ++k) {
    b.pi({"q0"}, Transition::ef, 1.0, "pi_ef");
    b.swap({{"q0", "A", Transition::ef, k}}, 1.0, "iswap_ef", false);
  }
  b.swap({{"q0", "A", Transition::ge, M}, {"q1", "B", Transition::ge, N}}, 1.0,
         "iswap_ge", sequential);
  return b.finish();
}

PulseSchedule compile_noon(const DeviceModel& device, const CalibrationTable& calib,
                           int N, const CompileOptions& opts, bool sequential) {
  if (N < 1) throw Error("compile_noon: N must be >= 1");
  return compile_moon(device, calib, N, N, opts, sequential);
}

PulseSchedule compile_benchmark(const DeviceModel& device, const CalibrationTable& calib,
                                ProtocolKind kind, const std::string& mixed_side,
                                const CompileOptions& opts) {
  Builder b(device, calib, opts);
  switch (kind) {
    case ProtocolKind::eigenstate_benchmark:
      b.pi({"q0"}, Transition::ge, 1.0, "pi_ge");
      b.swap({{"q0", "A", Transition::ge, 1}}, 1.0, "iswap_ge", false);
      b.pi({"q0"}, Transition::ge, 1.0, "pi_ge");
      b.swap({{"q0", "A", Transition::ge, 2}}, 1.0, "iswap_ge", false);
      break;
    case ProtocolKind::product_benchmark:
      b.pi({"q0", "q1"}, Transition::ge, 0.5, "half_pi_ge");
      b.swap({{"q0", "A", Transition::ge, 1}, {"q1", "B", Transition::ge, 1}}, 1.0,
             "iswap_ge", false);
      break;
    case ProtocolKind::mixed_component:
      if (mixed_side == "A") {
        b.pi({"q0"}, Transition::ge, 1.0, "pi_ge");
        b.swap({{"q0", "A", Transition::ge, 1}}, 1.0, "iswap_ge", false);
      } else if (mixed_side == "B") {
        b.pi({"q1"}, Transition::ge, 1.0, "pi_ge");
        b.swap({{"q1", "B", Transition::ge, 1}}, 1.0, "iswap_ge", false);
      } else {
        throw Error("compile_benchmark: mixed side must be A or B");
      }
      break;
    default:
      throw Error("compile_benchmark: unknown benchmark kind " + to_string(kind));
  }
  return b.finish();
}

namespace {

PulseSchedule shifted_after(const PulseSchedule& s, double t0, double shift) {
  PulseSchedule out = s;
  for (auto& [q, segs] : out.detuning)
    for (auto& seg : segs)
      if (seg.t_start >= t0) { seg.t_start += shift; seg.t_end += shift; }
  for (auto& [q, pulses] : out.drives)
    for (auto& p : pulses)
      if (p.start() >= t0) p.center += shift;
  for (auto& [r, ds] : out.displacements)
    for (auto& d : ds)
      if (d.time >= t0) d.time += shift;
  for (auto& st : out.steps)
    if (st.t_start >= t0) { st.t_start += shift; st.t_end += shift; }
  out.duration += shift;
  return out;
}

}  // namespace

PulseSchedule apply_phase_method(const DeviceModel& device, const ProtocolSpec& spec,
                                 const PulseSchedule& schedule) {
  spec.validate();
  PulseSchedule out = schedule;
  if (spec.phase_method == PhaseMethod::displacement) {
    out.tomography_phase_offset = spec.tomography_phase_offset;
  } else if (spec.phase_method == PhaseMethod::delay && spec.delay_before_transfer > 0) {
    auto it = std::find_if(schedule.steps.begin(), schedule.steps.end(),
                           [](const ScheduleStep& s) { return s.label == "iswap_C"; });
    if (it == schedule.steps.end())
      throw Error("apply_phase_method: schedule has no Bell-creation step");
    // first free slot after the Bell state exists
    const double t0 = std::nextafter(it->t_end, kInf);
    double start = schedule.duration;
    for (const auto& st : schedule.steps)
      if (st.t_start > it->t_end) start = std::min(start, st.t_start);
    const double buffer = start - it->t_end;
    out = shifted_after(schedule, t0, spec.delay_before_transfer + buffer);
    // (f_q0 - f_A) - (f_q1 - f_B) = delta with q0 parked at its idle point
    const double f_q1 = device.resonators.at("B").f_r +
                        (device.qubits.at("q0").f_ge_idle - device.resonators.at("A").f_r) -
                        spec.hold_detuning_mhz * 1e-3;
    out.detuning["q1"].push_back({start, start + spec.delay_before_transfer, f_q1, f_q1});
    out.steps.push_back({"hold", "q1", start, start + spec.delay_before_transfer});
    std::stable_sort(out.steps.begin(), out.steps.end(),
                     [](const auto& a, const auto& b) { return a.t_start < b.t_start; });
    out.validate();
  }
  return out;
}

PulseSchedule compile(const DeviceModel& device, const CalibrationTable& calib,
                      const ProtocolSpec& spec, const CompileOptions& opts) {
  spec.validate();
  PulseSchedule s;
  switch (spec.kind) {
    case ProtocolKind::noon:
      s = compile_noon(device, calib, spec.N, opts, spec.sequential_transfers);
      break;
    case ProtocolKind::moon:
      s = compile_moon(device, calib, spec.M, spec.N, opts, spec.sequential_transfers);
      break;
    case ProtocolKind::bell:
      s = compile_bell(device, calib, opts);
      break;
    default:
      s = compile_benchmark(device, calib, spec.kind, spec.mixed_side, opts);
  }
  return apply_phase_method(device, spec, s);
}

PulseSchedule with_idle(const PulseSchedule& schedule, double delay) {
  if (delay < 0) throw Error("with_idle: negative delay");
  PulseSchedule out = schedule;
  out.duration += delay;
  return out;
}

CompositeSpace generation_space(const ProtocolSpec& spec, int levels_C) {
  return CompositeSpace({{"q0", 3},
                         {"q1", 3},
                         {"A", spec.levels_A()},
                         {"B", spec.levels_B()},
                         {"C", levels_C}});
}

CVec noon_target(int M, int N, int levels_A, int levels_B, double theta) {
  if (M >= levels_A || N >= levels_B) throw TruncationError("noon_target: truncation too small");
  CVec psi = CVec::Zero(levels_A * levels_B);
  psi(M * levels_B) = 1.0 / std::sqrt(2.0);
  psi(N) += std::polar(1.0 / std::sqrt(2.0), theta);
  return psi;
}

}  // namespace noon
