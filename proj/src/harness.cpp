#include "noon/harness.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "noon/config.hpp"
#include "noon/dynamics.hpp"

namespace noon {

const char* const kVersion = "0.1.0";

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<double> range_from(const YAML::Node& n) {
  std::vector<double> out;
  if (n.IsSequence()) {
    for (const auto& v : n) out.push_back(v.as<double>());
    return out;
  }
  const double start = n["start"] ? n["start"].as<double>() : 0.0;
  const double stop = n["stop"].as<double>();
  const double step = n["step"].as<double>();
  if (!(step > 0.0)) throw Error("config: range step must be positive");
  const long count = std::lround(std::floor((stop - start) / step + 1e-9));
  for (long i = 0; i <= count; ++i) out.push_back(start + step * static_cast<double>(i));
  return out;
}

YAML::Node list_node(const std::vector<double>& v) {
  YAML::Node n(YAML::NodeType::Sequence);
  n.SetStyle(YAML::EmitterStyle::Flow);
  for (double x : v) n.push_back(x);
  return n;
}

std::vector<double> default_coincidence_taus() {
  std::vector<double> t;
  for (int i = 0; i <= 150; ++i) t.push_back(static_cast<double>(i));
  return t;
}

ReadoutModel readout_from(const YAML::Node& n) {
  if (!n) return ReadoutModel::ideal();
  if (n.IsScalar()) {
    const auto s = n.as<std::string>();
    if (s == "ideal") return ReadoutModel::ideal();
    if (s == "typical") return ReadoutModel::typical();
    throw Error("config: readout must be ideal, typical or a table");
  }
  ReadoutModel r = ReadoutModel::ideal();
  if (n["p_e_given_g"])
    for (const auto& it : n["p_e_given_g"]) r.p_e_given_g[it.first.as<std::string>()] = it.second.as<double>();
  if (n["p_g_given_e"])
    for (const auto& it : n["p_g_given_e"]) r.p_g_given_e[it.first.as<std::string>()] = it.second.as<double>();
  if (n["f_as_excited"]) r.f_as_excited = n["f_as_excited"].as<bool>();
  r.validate();
  return r;
}

YAML::Node readout_to(const ReadoutModel& r) {
  YAML::Node n;
  for (const auto& [q, v] : r.p_e_given_g) n["p_e_given_g"][q] = v;
  for (const auto& [q, v] : r.p_g_given_e) n["p_g_given_e"][q] = v;
  n["f_as_excited"] = r.f_as_excited;
  return n;
}

class Stopwatch {
 public:
  Stopwatch(RunManifest& m, std::string stage)
      : m_(m), stage_(std::move(stage)), t0_(std::chrono::steady_clock::now()) {}
  ~Stopwatch() {
    m_.timings.emplace_back(
        stage_, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count());
  }

 private:
  RunManifest& m_;
  std::string stage_;
  std::chrono::steady_clock::time_point t0_;
};

template <class F>
auto staged(const std::string& stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

void write_text(const ExperimentConfig& c, RunManifest& m, const std::string& name,
                const std::string& text) {
  fs::create_directories(c.output_dir);
  std::ofstream out(c.output_dir / name, std::ios::binary);
  if (!out) throw StageError("output", "cannot write " + (c.output_dir / name).string());
  out << text;
  m.files.push_back(name);
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string csv_of(const std::vector<TraceSet>& traces) {
  std::ostringstream s;
  write_csv(s, traces);
  return s.str();
}

json complex_json(cplx z) { return {{"re", z.real()}, {"im", z.imag()}}; }

json grid_json(const DisplacementGrid& g) {
  json pairs = json::array();
  for (size_t i = 0; i < g.pairs.size(); ++i)
    pairs.push_back({{"alpha", complex_json(g.pairs[i].first)},
                     {"beta", complex_json(g.pairs[i].second)},
                     {"radius", g.radii[g.radius_of_pair[i]]}});
  return {{"radii", g.radii}, {"points", g.points}, {"pairs", pairs}};
}

int idx(int m, int n, int lb) { return m * lb + n; }

NoiseSpec generation_noise(const ExperimentConfig& c, const PulseSchedule& s) {
  return c.noise ? noise_from_device(c.device, s.duration) : NoiseSpec::none();
}

NoiseSpec probe_noise(const ExperimentConfig& c) {
  return c.noise ? noise_from_device(c.device, c.tomography.tau_grid().back()) : NoiseSpec::none();
}

// Fills the measurement-facing fields from a state at lab time t.
void reduce(PreparedState& p, const QuantumState& state, const DeviceModel& device, double t) {
  const CMat ab = partial_trace(state, {"A", "B"}).matrix();
  p.rho_ab = to_resonator_frame(ab, p.levels_A, p.levels_B, device, t);
  p.blocks = qubit_diagonal_blocks(state);
  for (auto& b : p.blocks) b = to_resonator_frame(b, p.levels_A, p.levels_B, device, t);
  p.qubit_pops = qubit_populations(state);
}

double bell_fidelity(const QuantumState& state, double theta) {
  const CMat q = partial_trace(state, {"q0", "q1"}).matrix();
  const int eg = 1 * 3 + 0, ge = 0 * 3 + 1;
  return 0.5 * (q(eg, eg).real() + q(ge, ge).real()) +
         (std::polar(1.0, -theta) * q(ge, eg)).real();
}

double bell_phase(const QuantumState& state) {
  const CMat q = partial_trace(state, {"q0", "q1"}).matrix();
  return std::arg(q(0 * 3 + 1, 1 * 3 + 0));
}

// <0N| rho |M0>: its phase is the relative phase of the |0N> branch.
cplx branch_coherence(const CMat& rho, int M, int N, int lb) {
  return rho(idx(0, N, lb), idx(M, 0, lb));
}

int photons_A(const ProtocolSpec& s) { return s.kind == ProtocolKind::moon ? s.M : s.N; }

}  // namespace

void ExperimentConfig::validate() const {
  device.validate();
  protocol.validate();
  readout.validate();
  if (shots < 0) throw Error("config: shots must be positive or inf");
  if (shots > 0 && !seed_set) throw Error("config: a seed is required for finite shots");
  if (threads < 1) throw Error("config: threads must be >= 1");
  if (bootstrap < 0) throw Error("config: bootstrap must be >= 0");
  if (calibration.sequence_passes < 0) throw Error("config: sequence_passes must be >= 0");
  for (const auto* v : {&taus, &delays, &phase_offsets, &hold_delays})
    for (size_t i = 1; i < v->size(); ++i)
      if ((*v)[i] <= (*v)[i - 1]) throw Error("config: lists must be strictly increasing");
}

YAML::Node ExperimentConfig::to_yaml() const {
  YAML::Node n;
  n["device"] = device_to_yaml(device);
  n["protocol"] = protocol_to_yaml(protocol);
  n["noise"] = noise;
  if (shots > 0)
    n["shots"] = shots;
  else
    n["shots"] = "inf";
  n["seed"] = seed;
  n["readout"] = readout_to(readout);
  n["taus"] = list_node(taus);
  n["tomography"]["taus"] = list_node(tomography.tau_grid());
  n["tomography"]["radii"] = list_node(tomography.radii.empty() ? default_radii() : tomography.radii);
  n["tomography"]["tail_tolerance"] = tomography.tail_tolerance;
  n["tomography"]["extra_photons"] = tomography.extra_photons;
  n["tomography"]["bootstrap"] = bootstrap;
  n["delays"] = list_node(delays);
  n["phase_offsets"] = list_node(phase_offsets);
  n["hold_delays"] = list_node(hold_delays);
  n["mixed_ensemble"] = mixed_ensemble;
  n["compile"]["buffer"] = compile.buffer;
  n["compile"]["pi_fwhm"] = compile.pi_fwhm;
  n["calibration"]["dt"] = calibration.dt;
  n["calibration"]["max_offset_mhz"] = calibration.max_offset_mhz;
  n["calibration"]["min_transfer"] = calibration.min_transfer;
  n["calibration"]["sequence_passes"] = calibration.sequence_passes;
  return n;
}

namespace {

ExperimentConfig parse_config(const YAML::Node& n) {
  ExperimentConfig c;
  if (n["device"]) c.device = device_from_yaml(n["device"]);
  if (n["protocol"]) c.protocol = protocol_from_yaml(n["protocol"]);
  if (n["noise"]) c.noise = n["noise"].as<bool>();
  if (n["shots"]) {
    const auto s = n["shots"].as<std::string>();
    c.shots = (s == "inf" || s == ".inf") ? 0 : n["shots"].as<long>();
    if (c.shots <= 0 && s != "inf" && s != ".inf") throw Error("config: shots must be positive or inf");
  }
  if (n["seed"]) {
    c.seed = n["seed"].as<std::uint64_t>();
    c.seed_set = true;
  }
  c.readout = readout_from(n["readout"]);
  c.taus = n["taus"] ? range_from(n["taus"]) : default_coincidence_taus();
  if (const auto t = n["tomography"]) {
    if (t["taus"]) c.tomography.taus = range_from(t["taus"]);
    if (t["radii"]) c.tomography.radii = range_from(t["radii"]);
    if (t["tail_tolerance"]) c.tomography.tail_tolerance = t["tail_tolerance"].as<double>();
    if (t["extra_photons"]) c.tomography.extra_photons = t["extra_photons"].as<int>();
    if (t["bootstrap"]) c.bootstrap = t["bootstrap"].as<int>();
  }
  if (n["delays"]) c.delays = range_from(n["delays"]);
  if (n["phase_offsets"]) c.phase_offsets = range_from(n["phase_offsets"]);
  if (n["hold_delays"]) c.hold_delays = range_from(n["hold_delays"]);
  if (n["mixed_ensemble"]) c.mixed_ensemble = n["mixed_ensemble"].as<bool>();
  if (n["threads"]) c.threads = n["threads"].as<int>();
  if (n["output_dir"]) c.output_dir = n["output_dir"].as<std::string>();
  if (const auto k = n["compile"]) {
    if (k["buffer"]) c.compile.buffer = k["buffer"].as<double>();
    if (k["pi_fwhm"]) c.compile.pi_fwhm = c.calibration.pi_fwhm = k["pi_fwhm"].as<double>();
  }
  if (const auto k = n["calibration"]) {
    if (k["dt"]) c.calibration.dt = k["dt"].as<double>();
    if (k["max_offset_mhz"]) c.calibration.max_offset_mhz = k["max_offset_mhz"].as<double>();
    if (k["min_transfer"]) c.calibration.min_transfer = k["min_transfer"].as<double>();
    if (k["sequence_passes"]) c.calibration.sequence_passes = k["sequence_passes"].as<int>();
  }
  c.validate();
  return c;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_yaml(const YAML::Node& n) {
  try {
    return parse_config(n);
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    std::string what = e.what();
    if (what.rfind("config: ", 0) == 0) what = what.substr(8);
    throw StageError("config", what);
  }
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  try {
    return from_yaml(YAML::LoadFile(path.string()));
  } catch (const YAML::Exception& e) {
    throw StageError("config", path.string() + ": " + e.what());
  }
}

std::uint64_t config_hash(const ExperimentConfig& config) {
  const std::string text = emit(config.to_yaml());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

json RunManifest::to_json() const {
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash));
  json t = json::array();
  for (const auto& [stage, s] : timings) t.push_back({{"stage", stage}, {"seconds", s}});
  return {{"command", command}, {"config_hash", hash}, {"version", version},
          {"timings", t}, {"files", files}};
}

void write_manifest(const ExperimentConfig& config, RunManifest& manifest) {
  manifest.config_hash = config_hash(config);
  fs::create_directories(config.output_dir);
  std::vector<std::string> files = manifest.files;
  files.push_back("manifest.json");
  RunManifest m = manifest;
  m.files = files;
  std::ofstream(config.output_dir / "manifest.json", std::ios::binary) << dump(m.to_json());
  manifest.files = files;
}

PulseSchedule prepare_schedule(const ExperimentConfig& config, const ProtocolSpec& spec,
                               CalibrationTable& calibration) {
  calibration = staged("calibrate", [&] {
    bool fresh = false;
    for (const auto& key : required_swaps(spec)) fresh |= !calibration.swaps.count(key);
    CalibrationTable t = calibrate_for(config.device, spec, calibration, config.calibration);
    // tune once, when the entries were just measured
    if (fresh) t = tune_in_sequence(config.device, spec, std::move(t), config.calibration).table;
    return t;
  });
  return staged("compile", [&] { return compile(config.device, calibration, spec, config.compile); });
}

PreparedState prepare_state(const ExperimentConfig& config, const ProtocolSpec& spec,
                            CalibrationTable& calibration, double idle) {
  PreparedState p;
  p.schedule = prepare_schedule(config, spec, calibration);
  p.calibration = calibration;
  p.levels_A = spec.levels_A();
  p.levels_B = spec.levels_B();
  const CompositeSpace space = generation_space(spec);
  const QuantumState vac = fock_state(space, std::vector<int>(space.subsystems().size(), 0));
  const double t_end = p.schedule.duration;
  const std::vector<double> at_end{t_end};

  const QuantumState reference = staged("generate", [&] {
    return evolve_pure(vac, config.device, p.schedule, at_end).states.back();
  });
  if (config.noise) {
    p.state = staged("generate", [&] {
      return evolve_lindblad(QuantumState::density(space, vac.density_matrix()), config.device,
                             p.schedule, generation_noise(config, p.schedule), at_end)
          .states.back();
    });
  } else {
    p.state = reference;
  }

  // reference phase and ideal target
  PreparedState ref;
  ref.levels_A = p.levels_A;
  ref.levels_B = p.levels_B;
  reduce(ref, reference, config.device, t_end);
  const int lb = p.levels_B;
  switch (spec.kind) {
    case ProtocolKind::noon:
    case ProtocolKind::moon: {
      const int M = photons_A(spec);
      p.target_phase = std::arg(branch_coherence(ref.rho_ab, M, spec.N, lb));
      p.target = noon_target(M, spec.N, p.levels_A, lb, p.target_phase);
      break;
    }
    case ProtocolKind::eigenstate_benchmark:
      p.target = CVec::Zero(p.levels_A * lb);
      p.target(idx(2, 0, lb)) = 1.0;
      break;
    case ProtocolKind::bell:
      p.target_phase = bell_phase(reference);
      break;
    default: {
      Eigen::SelfAdjointEigenSolver<CMat> es(ref.rho_ab);
      p.target = es.eigenvectors().col(es.eigenvalues().size() - 1);
    }
  }

  if (idle > 0.0) {
    const QuantumState reduced = partial_trace(p.state, {"q0", "q1", "A", "B"});
    PulseSchedule hold;
    hold.duration = idle;
    const std::vector<double> at{idle};
    NoiseSpec noise = generation_noise(config, p.schedule);
    noise.rates.erase("C");
    p.state = staged("idle", [&] {
      return evolve_lindblad(QuantumState::density(reduced.space(), reduced.density_matrix()),
                             config.device, hold, noise, at)
          .states.back();
    });
  }
  reduce(p, p.state, config.device, t_end + idle);
  return p;
}

double dominant_frequency(const std::vector<double>& t, const std::vector<double>& y,
                          double f_min_mhz, double f_max_mhz) {
  if (t.size() != y.size() || t.size() < 8) throw Error("dominant_frequency: need >= 8 samples");
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  auto power = [&](double f_mhz) {
    const double w = kTwoPi * f_mhz * 1e-3;
    cplx s = 0.0;
    for (size_t i = 0; i < t.size(); ++i) s += (y[i] - mean) * std::polar(1.0, -w * t[i]);
    return std::norm(s);
  };
  const double df = 0.05;
  double best_f = f_min_mhz, best_p = -1.0;
  for (double f = f_min_mhz; f <= f_max_mhz; f += df) {
    const double pw = power(f);
    if (pw > best_p) best_p = pw, best_f = f;
  }
  // The periodogram peak is pulled by the mirror component on short
  // records; refine with a least-squares fit of offset + one sinusoid.
  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
  auto residual = [&](double f_mhz) {
    const double w = kTwoPi * f_mhz * 1e-3;
    Eigen::MatrixXd X(yv.size(), 3);
    for (Eigen::Index i = 0; i < yv.size(); ++i)
      X.row(i) << 1.0, std::cos(w * t[i]), std::sin(w * t[i]);
    return (yv - X * X.colPivHouseholderQr().solve(yv)).squaredNorm();
  };
  double lo = std::max(f_min_mhz, best_f - 2.0), hi = std::min(f_max_mhz, best_f + 2.0);
  double best_r = residual(best_f);
  for (double f = lo; f <= hi; f += df) {
    const double r = residual(f);
    if (r < best_r) best_r = r, best_f = f;
  }
  lo = best_f - df;
  hi = best_f + df;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 40; ++it) {
    const double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    if (residual(x1) < residual(x2))
      hi = x2;
    else
      lo = x1;
  }
  return 0.5 * (lo + hi);
}

TomographyOutcome tomograph(const ExperimentConfig& config, const ProtocolSpec& spec,
                            const PreparedState& prepared, std::uint64_t seed,
                            double phase_offset) {
  TomographyOutcome out;
  const TomographyPipeline pipe = staged("tomography", [&] {
    TomographyOptions o = config.tomography;
    o.threads = config.threads;
    return TomographyPipeline(config.device, probe_noise(config), prepared.levels_A,
                              prepared.levels_B, prepared.qubit_pops, o);
  });
  out.grid = pipe.grid();
  out.traces = staged("measure", [&] {
    return pipe.simulate(prepared.blocks, prepared.levels_A, prepared.levels_B, config.readout,
                         config.shots, seed, phase_offset);
  });
  out.estimate = staged("reconstruct", [&] { return pipe.reconstruct(out.traces, config.readout); });
  if (config.shots > 0 && config.bootstrap > 1)
    staged("bootstrap", [&] {
      pipe.bootstrap_errors(out.traces, config.readout, config.bootstrap,
                            derive_seed(seed, 0xB007), out.estimate);
      return 0;
    });

  const CMat& rho = out.estimate.rho;
  out.negativity = negativity(rho, prepared.levels_A, prepared.levels_B);
  json m = json::array();
  if (prepared.target.size() == rho.rows()) {
    out.fidelity = fidelity(rho, prepared.target);
    m.push_back(metric_record("fidelity", out.fidelity, 0.0,
                              {{"target_phase", prepared.target_phase},
                               {"generation_fidelity", fidelity(prepared.rho_ab, prepared.target)}}));
  }
  m.push_back(metric_record("negativity", out.negativity, 0.0,
                            {{"generation_negativity",
                              negativity(prepared.rho_ab, prepared.levels_A, prepared.levels_B)}}));
  const int M = photons_A(spec);
  if (M >= 1 && M < prepared.levels_A && spec.N < prepared.levels_B) {
    out.eof = eof_effective(rho, prepared.levels_A, prepared.levels_B, M, spec.N);
    m.push_back(metric_record("eof_effective", out.eof.eof, 0.0,
                              {{"concurrence", out.eof.concurrence},
                               {"projection_weight", out.eof.weight},
                               {"reliable", out.eof.reliable}}));
    const cplx c = branch_coherence(rho, M, spec.N, prepared.levels_B);
    m.push_back(metric_record("branch_coherence", std::abs(c), 0.0, {{"phase", std::arg(c)}}));
  }
  m.push_back(metric_record("reconstruction_residual", out.estimate.residual, 0.0,
                            {{"condition_number", out.estimate.condition_number},
                             {"clipped_mass", out.estimate.clipped_mass},
                             {"min_raw_eigenvalue", out.estimate.min_raw_eigenvalue}}));
  out.metrics = m;
  return out;
}

CalibrationTable run_calibrate(const ExperimentConfig& config, RunManifest& manifest) {
  manifest.command = "calibrate";
  CalibrationTable table;
  PulseSchedule s;
  {
    Stopwatch w(manifest, "calibrate");
    s = prepare_schedule(config, config.protocol, table);
  }
  write_text(config, manifest, "calibration.yaml", emit(calibration_to_yaml(table)));
  write_text(config, manifest, "schedule.yaml", emit(schedule_to_yaml(s)));
  write_manifest(config, manifest);
  return table;
}

CoincidenceResult run_coincidence(const ExperimentConfig& config, RunManifest& manifest) {
  manifest.command = "coincidence";
  if (config.taus.empty()) throw StageError("config", "empty tau grid");
  CoincidenceResult r;
  CalibrationTable cal;
  std::vector<ProtocolSpec> components{config.protocol};
  const bool ensemble =
      config.mixed_ensemble && config.protocol.kind == ProtocolKind::mixed_component;
  if (ensemble) {
    components.assign(2, config.protocol);
    components[0].mixed_side = "A";
    components[1].mixed_side = "B";
  }
  std::vector<TraceSet> traces;
  for (size_t k = 0; k < components.size(); ++k) {
    PreparedState p;
    {
      Stopwatch w(manifest, "prepare");
      p = prepare_state(config, components[k], cal);
    }
    Stopwatch w(manifest, "measure");
    traces.push_back(staged("measure", [&] {
      const NoiseSpec noise = config.noise ? noise_from_device(config.device, config.taus.back())
                                           : NoiseSpec::none();
      return coincidence_trace(config.device, p.state, config.taus, noise, config.shots,
                               config.readout, derive_seed(config.seed, k));
    }));
  }
  r.trace = ensemble ? synth_mixed_ensemble(traces[0], traces[1]) : traces[0];
  std::vector<double> pge;
  for (const auto& p : r.trace.probs) pge.push_back(p[1]);
  double spread = 0.0;
  for (double v : pge) spread = std::max(spread, std::abs(v - pge.front()));
  r.frequency_mhz = spread > 1e-6 ? dominant_frequency(r.trace.tau, pge) : 0.0;

  write_text(config, manifest, "traces.csv", csv_of({r.trace}));
  json summary = {{"protocol", to_string(config.protocol.kind)},
                  {"N", config.protocol.N},
                  {"mixed_ensemble", ensemble},
                  {"shots", config.shots},
                  {"seed", config.seed},
                  {"metrics", json::array({metric_record("pge_frequency_mhz", r.frequency_mhz)})}};
  write_text(config, manifest, "summary.json", dump(summary));
  write_manifest(config, manifest);
  return r;
}

namespace {

TomographyOutcome tomography_run(const ExperimentConfig& config, const ProtocolSpec& spec,
                                 RunManifest& manifest) {
  CalibrationTable cal;
  TomographyOutcome out;
  if (spec.kind == ProtocolKind::mixed_component && config.mixed_ensemble) {
    // equal mixture of the two single-photon components, measured as one data set
    std::vector<PreparedState> parts;
    for (const char* side : {"A", "B"}) {
      ProtocolSpec s = spec;
      s.mixed_side = side;
      Stopwatch w(manifest, "prepare");
      parts.push_back(prepare_state(config, s, cal));
    }
    PreparedState mix = parts[0];
    for (size_t i = 0; i < mix.blocks.size(); ++i)
      mix.blocks[i] = 0.5 * (parts[0].blocks[i] + parts[1].blocks[i]);
    mix.rho_ab = 0.5 * (parts[0].rho_ab + parts[1].rho_ab);
    mix.qubit_pops = 0.5 * (parts[0].qubit_pops + parts[1].qubit_pops);
    mix.target = CVec();
    Stopwatch w(manifest, "tomography");
    TomographyOptions o = config.tomography;
    o.threads = config.threads;
    const TomographyPipeline pipe(config.device, probe_noise(config), mix.levels_A, mix.levels_B,
                                  mix.qubit_pops, o);
    std::vector<std::vector<TraceSet>> sets;
    for (size_t k = 0; k < parts.size(); ++k)
      sets.push_back(pipe.simulate(parts[k].blocks, mix.levels_A, mix.levels_B, config.readout,
                                   config.shots, derive_seed(config.seed, k)));
    for (size_t i = 0; i < sets[0].size(); ++i)
      out.traces.push_back(synth_mixed_ensemble(sets[0][i], sets[1][i]));
    out.estimate = staged("reconstruct", [&] { return pipe.reconstruct(out.traces, config.readout); });
    out.negativity = negativity(out.estimate.rho, mix.levels_A, mix.levels_B);
    out.eof = eof_effective(out.estimate.rho, mix.levels_A, mix.levels_B, 1, 1);
    out.metrics = json::array(
        {metric_record("negativity", out.negativity),
         metric_record("eof_effective", out.eof.eof, 0.0,
                       {{"projection_weight", out.eof.weight}, {"reliable", out.eof.reliable}}),
         metric_record("off_diagonal_01_10", std::abs(out.estimate.rho(idx(0, 1, 2), idx(1, 0, 2))))});
    out.grid = pipe.grid();
  } else {
    PreparedState p;
    {
      Stopwatch w(manifest, "prepare");
      p = prepare_state(config, spec, cal);
    }
    if (spec.kind == ProtocolKind::bell) {
      out.fidelity = bell_fidelity(p.state, p.target_phase);
      out.metrics = json::array({metric_record("bell_fidelity", out.fidelity, 0.0,
                                               {{"target_phase", p.target_phase}})});
      write_text(config, manifest, "metrics.json", dump(out.metrics));
      return out;
    }
    Stopwatch w(manifest, "tomography");
    out = tomograph(config, spec, p, config.seed, spec.tomography_phase_offset);
  }
  write_text(config, manifest, "grid.json", dump(grid_json(out.grid)));
  write_text(config, manifest, "traces.csv", csv_of(out.traces));
  write_text(config, manifest, "density_matrix.json", out.estimate.to_json() + "\n");
  write_text(config, manifest, "metrics.json", dump(out.metrics));
  return out;
}

}  // namespace

TomographyOutcome run_tomography(const ExperimentConfig& config, RunManifest& manifest) {
  manifest.command = "tomography";
  TomographyOutcome out = tomography_run(config, config.protocol, manifest);
  write_manifest(config, manifest);
  return out;
}

TomographyOutcome run_moon(const ExperimentConfig& config, RunManifest& manifest) {
  manifest.command = "moon";
  ProtocolSpec spec = config.protocol;
  spec.kind = ProtocolKind::moon;
  if (spec.M <= spec.N) throw StageError("config", "moon needs protocol.M > protocol.N");
  TomographyOutcome out = tomography_run(config, spec, manifest);
  write_manifest(config, manifest);
  return out;
}

DecayResult run_decay_scan(const ExperimentConfig& config, RunManifest& manifest) {
  manifest.command = "decay";
  if (config.delays.size() < 4) throw StageError("config", "decay scan needs at least 4 delays");
  const ProtocolSpec& spec = config.protocol;
  if (spec.kind != ProtocolKind::noon && spec.kind != ProtocolKind::moon)
    throw StageError("config", "decay scan needs a NOON or MOON protocol");
  CalibrationTable cal;
  PreparedState base;
  {
    Stopwatch w(manifest, "prepare");
    base = prepare_state(config, spec, cal);
  }
  // one idle run sampled at every delay, C traced out
  const QuantumState reduced = partial_trace(base.state, {"q0", "q1", "A", "B"});
  PulseSchedule hold;
  hold.duration = config.delays.back();
  NoiseSpec noise = generation_noise(config, base.schedule);
  noise.rates.erase("C");
  std::vector<QuantumState> states;
  {
    Stopwatch w(manifest, "idle");
    states = staged("idle", [&] {
      return evolve_lindblad(QuantumState::density(reduced.space(), reduced.density_matrix()),
                             config.device, hold, noise, config.delays)
          .states;
    });
  }
  DecayResult r;
  r.delays = config.delays;
  const int M = photons_A(spec), N = spec.N, lb = base.levels_B;
  std::vector<std::pair<double, cplx>> off, diag;
  json per = json::array();
  TomographyOptions o = config.tomography;
  o.threads = config.threads;
  const ProbeModel probe = staged("tomography", [&] {
    return TomographyPipeline::make_probe(config.device, probe_noise(config), base.levels_A, lb, o);
  });
  TomographyPipeline pipe(probe, base.levels_A, lb, base.qubit_pops, o);
  for (size_t k = 0; k < states.size(); ++k) {
    Stopwatch w(manifest, "tomography");
    PreparedState p = base;
    reduce(p, states[k], config.device, base.schedule.duration + config.delays[k]);
    pipe.set_qubit_populations(p.qubit_pops);
    const auto traces = pipe.simulate(p.blocks, p.levels_A, lb, config.readout, config.shots,
                                      derive_seed(config.seed, k));
    const DensityMatrixEstimate est = staged("reconstruct", [&] { return pipe.reconstruct(traces, config.readout); });
    r.rhos.push_back(est.rho);
    const cplx c = branch_coherence(est.rho, M, N, lb);
    const double pop = est.rho(idx(M, 0, lb), idx(M, 0, lb)).real() + est.rho(idx(0, N, lb), idx(0, N, lb)).real();
    off.emplace_back(config.delays[k], c);
    diag.emplace_back(config.delays[k], pop);
    char name[64];
    std::snprintf(name, sizeof name, "density_matrix_%05.0f.json", config.delays[k]);
    write_text(config, manifest, name, est.to_json() + "\n");
    per.push_back({{"delay_ns", config.delays[k]},
                   {"off_diagonal", complex_json(c)},
                   {"diagonal_sum", pop},
                   {"file", name}});
  }
  r.off_diagonal = staged("fit", [&] { return decay_fit(off, "<0N|rho|M0>"); });
  r.diagonal = staged("fit", [&] { return decay_fit(diag, "<M0|rho|M0> + <0N|rho|0N>"); });
  const double analytic = 2.0 / (1.0 / config.device.resonators.at("A").T1 +
                                 1.0 / config.device.resonators.at("B").T1);
  json summary = {
      {"points", per},
      {"metrics",
       json::array({metric_record("tau_D_off_diagonal_ns", r.off_diagonal.tau_D, 0.0,
                                  {{"amplitude", r.off_diagonal.amplitude},
                                   {"residual", r.off_diagonal.residual},
                                   {"analytic_ns", analytic}}),
                    metric_record("tau_D_diagonal_ns", r.diagonal.tau_D, 0.0,
                                  {{"amplitude", r.diagonal.amplitude},
                                   {"residual", r.diagonal.residual}})})}};
  write_text(config, manifest, "decay.json", dump(summary));
  write_manifest(config, manifest);
  return r;
}

PhaseScanResult run_phase_scan(const ExperimentConfig& config, RunManifest& manifest) {
  manifest.command = "phase";
  const ProtocolSpec& spec = config.protocol;
  if (spec.kind != ProtocolKind::noon) throw StageError("config", "phase scan needs a NOON protocol");
  PhaseScanResult r;
  CalibrationTable cal;
  const int N = spec.N, lb = spec.levels_B();
  TomographyOptions o = config.tomography;
  o.threads = config.threads;
  json per = json::array();
  auto record = [&](double x, const DensityMatrixEstimate& est, size_t k) {
    const cplx c = branch_coherence(est.rho, N, N, lb);
    r.x.push_back(x);
    r.element.push_back(c);
    char name[64];
    std::snprintf(name, sizeof name, "density_matrix_%03zu.json", k);
    write_text(config, manifest, name, est.to_json() + "\n");
    per.push_back({{"x", x}, {"element", complex_json(c)}, {"file", name}});
  };
  std::string unit;
  if (spec.phase_method == PhaseMethod::delay) {
    if (config.hold_delays.size() < 3) throw StageError("config", "need at least 3 hold delays");
    unit = "rad/ns";
    std::unique_ptr<TomographyPipeline> pipe;
    for (size_t k = 0; k < config.hold_delays.size(); ++k) {
      ProtocolSpec s = spec;
      s.delay_before_transfer = config.hold_delays[k];
      PreparedState p;
      {
        Stopwatch w(manifest, "prepare");
        p = prepare_state(config, s, cal);
      }
      Stopwatch w(manifest, "tomography");
      if (!pipe)
        pipe = std::make_unique<TomographyPipeline>(config.device, probe_noise(config), p.levels_A,
                                                    lb, p.qubit_pops, o);
      pipe->set_qubit_populations(p.qubit_pops);
      const auto traces = pipe->simulate(p.blocks, p.levels_A, lb, config.readout, config.shots,
                                         derive_seed(config.seed, k));
      record(config.hold_delays[k], pipe->reconstruct(traces, config.readout), k);
    }
  } else {
    if (config.phase_offsets.size() < 3) throw StageError("config", "need at least 3 phase offsets");
    unit = "rad/rad";
    ProtocolSpec s = spec;
    s.phase_method = PhaseMethod::displacement;
    PreparedState p;
    {
      Stopwatch w(manifest, "prepare");
      p = prepare_state(config, s, cal);
    }
    Stopwatch w(manifest, "tomography");
    const TomographyPipeline pipe(config.device, probe_noise(config), p.levels_A, lb,
                                  p.qubit_pops, o);
    for (size_t k = 0; k < config.phase_offsets.size(); ++k) {
      const auto traces = pipe.simulate(p.blocks, p.levels_A, lb, config.readout, config.shots,
                                        derive_seed(config.seed, k), config.phase_offsets[k]);
      record(config.phase_offsets[k], pipe.reconstruct(traces, config.readout), k);
    }
  }
  std::vector<std::pair<double, cplx>> series;
  for (size_t k = 0; k < r.x.size(); ++k) series.emplace_back(r.x[k], r.element[k]);
  r.fit = staged("fit", [&] { return phase_fit(series); });
  const bool by_delay = spec.phase_method == PhaseMethod::delay;
  json diag = {{"intercept", r.fit.intercept},
               {"residual", r.fit.residual},
               {"ambiguous", r.fit.ambiguous},
               {"unit", unit},
               {"element", "<0N|rho|N0>"}};
  if (by_delay)
    diag["detuning_mhz"] = r.fit.slope / kTwoPi * 1e3;
  json summary = {{"method", to_string(by_delay ? PhaseMethod::delay : PhaseMethod::displacement)},
                  {"points", per},
                  {"metrics", json::array({metric_record("phase_slope", r.fit.slope, 0.0, diag)})}};
  write_text(config, manifest, "phase.json", dump(summary));
  write_manifest(config, manifest);
  return r;
}

}  // namespace noon
