#pragma once

// Experiment pipelines behind the command-line tool.  Each run writes its
// data files plus a manifest into the output directory.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "noon/measurement.hpp"
#include "noon/metrics.hpp"
#include "noon/protocol.hpp"
#include "noon/tomography.hpp"

namespace noon {

extern const char* const kVersion;

struct ExperimentConfig {
  DeviceModel device = default_device();
  ProtocolSpec protocol;
  bool noise = false;
  long shots = 0;  // 0: exact probabilities
  std::uint64_t seed = 0;
  bool seed_set = false;
  ReadoutModel readout = ReadoutModel::ideal();
  /// Coincidence tau grid (ns).
  std::vector<double> taus;
  TomographyOptions tomography;
  int bootstrap = 0;
  /// Decay scan idle times (ns).
  std::vector<double> delays;
  /// Phase scan: offsets (rad) for the displacement method, hold times (ns)
  /// for the delay method.
  std::vector<double> phase_offsets;
  std::vector<double> hold_delays;
  /// mixed_component runs: average the A and B components into one data set.
  bool mixed_ensemble = false;
  int threads = 1;
  std::filesystem::path output_dir = "out";
  CompileOptions compile;
  CalibrationOptions calibration;

  void validate() const;
  YAML::Node to_yaml() const;
  static ExperimentConfig from_yaml(const YAML::Node& node);
  static ExperimentConfig load(const std::filesystem::path& path);
};

/// 64-bit FNV-1a of the canonical YAML form.
std::uint64_t config_hash(const ExperimentConfig& config);

struct RunManifest {
  std::string command;
  std::uint64_t config_hash = 0;
  std::string version = kVersion;
  std::vector<std::pair<std::string, double>> timings;  // stage, seconds
  std::vector<std::string> files;

  nlohmann::json to_json() const;
};

/// Error tagged with the pipeline stage that raised it.
class StageError : public Error {
 public:
  StageError(const std::string& stage, const std::string& what)
      : Error(stage + ": " + what), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// State after the generation sequence, reduced for measurement.
struct PreparedState {
  PulseSchedule schedule;
  CalibrationTable calibration;
  QuantumState state = QuantumState::pure(CompositeSpace(), CVec::Ones(1));  // full device space
  int levels_A = 0, levels_B = 0;
  /// A x B density matrix in each resonator's own frame.
  CMat rho_ab;
  /// Qubit-diagonal (A, B) blocks in the resonator frames.
  std::vector<CMat> blocks;
  Eigen::Matrix3d qubit_pops;
  /// Relative phase of the |0N> branch in the noiseless reference run.
  double target_phase = 0.0;
  CVec target;  // ideal state with target_phase
};

/// Calibrates what `spec` needs and compiles it.
PulseSchedule prepare_schedule(const ExperimentConfig& config, const ProtocolSpec& spec,
                               CalibrationTable& calibration);

/// Runs generation (noisy if config.noise).  `idle` ns of free evolution
/// are appended after the sequence.
PreparedState prepare_state(const ExperimentConfig& config, const ProtocolSpec& spec,
                            CalibrationTable& calibration, double idle = 0.0);

/// Dominant oscillation frequency (MHz) of a sampled signal, from the peak
/// of its periodogram, refined by a least-squares fit of one sinusoid.
double dominant_frequency(const std::vector<double>& t, const std::vector<double>& y,
                          double f_min_mhz = 2.0, double f_max_mhz = 200.0);

struct TomographyOutcome {
  DensityMatrixEstimate estimate;
  DisplacementGrid grid;
  std::vector<TraceSet> traces;
  nlohmann::json metrics;
  double fidelity = 0.0;
  double negativity = 0.0;
  EofResult eof;
};

/// Simulates tomography data for a prepared state and reconstructs it.
TomographyOutcome tomograph(const ExperimentConfig& config, const ProtocolSpec& spec,
                            const PreparedState& prepared, std::uint64_t seed,
                            double phase_offset = 0.0);

struct CoincidenceResult {
  TraceSet trace;
  double frequency_mhz = 0.0;  // dominant frequency of P_ge
};

struct DecayResult {
  std::vector<double> delays;
  std::vector<CMat> rhos;
  DecayFit off_diagonal;
  DecayFit diagonal;
};

struct PhaseScanResult {
  std::vector<double> x;
  std::vector<cplx> element;
  PhaseFit fit;
};

CalibrationTable run_calibrate(const ExperimentConfig& config, RunManifest& manifest);
CoincidenceResult run_coincidence(const ExperimentConfig& config, RunManifest& manifest);
TomographyOutcome run_tomography(const ExperimentConfig& config, RunManifest& manifest);
DecayResult run_decay_scan(const ExperimentConfig& config, RunManifest& manifest);
PhaseScanResult run_phase_scan(const ExperimentConfig& config, RunManifest& manifest);
/// Tomography of a MOON state (protocol kind forced to moon).
TomographyOutcome run_moon(const ExperimentConfig& config, RunManifest& manifest);

/// Writes manifest.json into config.output_dir.
void write_manifest(const ExperimentConfig& config, RunManifest& manifest);

}  // namespace noon
