#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "common.hpp"
#include "noon/config.hpp"
#include "noon/harness.hpp"

using namespace noon;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "noon_harness_tests" / name;
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ExperimentConfig base_config(int N) {
  ExperimentConfig c;
  c.device = testing::parked_device();
  c.protocol.N = N;
  c.calibration.sequence_passes = 0;  // generation quality is covered elsewhere
  c.taus.clear();
  for (int i = 0; i <= 150; ++i) c.taus.push_back(i);
  return c;
}

// Every file in the run directory, manifest included, is listed once.
void check_inventory(const fs::path& dir) {
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  std::set<std::string> listed, present;
  for (const auto& f : manifest["files"]) listed.insert(f.get<std::string>());
  for (const auto& e : fs::directory_iterator(dir)) present.insert(e.path().filename().string());
  CHECK(listed == present);
  CHECK(manifest["files"].size() == listed.size());
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("config parsing") {
  const auto c = ExperimentConfig::from_yaml(YAML::Load(R"(
device:
  qubits: {q0: {f_ge_idle: 7.5}, q1: {f_ge_idle: 7.45}}
  g_over_pi: {q0-A: 18.0}
protocol: {kind: noon, N: 2}
noise: true
shots: 500
seed: 17
readout: typical
taus: {start: 0, stop: 10, step: 2}
tomography: {radii: [0, 0.5], bootstrap: 4}
delays: [16, 250, 500, 1000]
mixed_ensemble: true
)"));
  CHECK(c.device.qubits.at("q0").f_ge_idle == 7.5);
  CHECK(c.device.coupling("q0", "A") == 18.0);
  CHECK(c.device.coupling("q1", "B") == 17.4);
  CHECK(c.protocol.N == 2);
  CHECK(c.shots == 500);
  CHECK(c.seed_set);
  CHECK(c.readout.p_g_given_e.at("q0") == doctest::Approx(0.10));
  CHECK(c.taus == std::vector<double>{0, 2, 4, 6, 8, 10});
  CHECK(c.tomography.radii.size() == 2);
  CHECK(c.bootstrap == 4);
  CHECK(c.mixed_ensemble);

  // canonical form round trips and hashes stably
  const auto again = ExperimentConfig::from_yaml(c.to_yaml());
  CHECK(emit(again.to_yaml()) == emit(c.to_yaml()));
  CHECK(config_hash(again) == config_hash(c));
  ExperimentConfig other = c;
  other.seed = 18;
  CHECK(config_hash(other) != config_hash(c));

  CHECK_THROWS_AS(ExperimentConfig::from_yaml(YAML::Load("shots: 100")), StageError);
  CHECK_THROWS_AS(ExperimentConfig::from_yaml(YAML::Load("delays: [5, 3, 9]")), StageError);
  CHECK_THROWS_AS(ExperimentConfig::from_yaml(YAML::Load("protocol: {kind: noon, N: 0}")), StageError);
  CHECK_THROWS_AS(ExperimentConfig::from_yaml(YAML::Load("readout: perfect")), StageError);
  try {
    ExperimentConfig::from_yaml(YAML::Load("shots: 100"));
  } catch (const StageError& e) {
    CHECK(e.stage() == "config");
  }
}

TEST_CASE("config files round trip through disk") {
  const fs::path dir = scratch("yaml");
  fs::create_directories(dir);
  ExperimentConfig c = base_config(1);
  c.delays = {16, 250, 500};
  std::ofstream(dir / "c.yaml") << emit(c.to_yaml());
  const auto back = ExperimentConfig::load(dir / "c.yaml");
  CHECK(back.delays == c.delays);
  CHECK(config_hash(back) == config_hash(c));
  CHECK_THROWS_AS(ExperimentConfig::load(dir / "missing.yaml"), StageError);
}

TEST_CASE("dominant frequency") {
  std::vector<double> t, y;
  for (int i = 0; i <= 150; ++i) {
    t.push_back(i);
    y.push_back(0.5 * std::pow(std::sin(kTwoPi * 0.5 * 0.0231 * i), 2));
  }
  CHECK(dominant_frequency(t, y) == doctest::Approx(23.1).epsilon(1e-3));
  CHECK_THROWS_AS(dominant_frequency({0, 1}, {0, 1}), Error);
}

TEST_CASE("coincidence runs") {
  ExperimentConfig c1 = base_config(1), c2 = base_config(2);
  c1.output_dir = scratch("coinc1");
  c2.output_dir = scratch("coinc2");
  RunManifest m1, m2;
  const auto r1 = run_coincidence(c1, m1);
  const auto r2 = run_coincidence(c2, m2);
  CHECK(r2.frequency_mhz / r1.frequency_mhz == doctest::Approx(std::sqrt(2.0)).epsilon(0.02));
  check_inventory(c1.output_dir);
  CHECK(m1.command == "coincidence");
  CHECK(!m1.timings.empty());

  // mixed ensemble of |10> and |01> matches the N=1 traces within sampling noise
  ExperimentConfig mix = base_config(1);
  mix.protocol.kind = ProtocolKind::mixed_component;
  mix.mixed_ensemble = true;
  mix.shots = 300;
  mix.seed = 4;
  mix.seed_set = true;
  mix.output_dir = scratch("mixed");
  RunManifest mm;
  const auto rm = run_coincidence(mix, mm);
  double worst = 0.0;
  for (size_t i = 0; i < rm.trace.probs.size(); ++i)
    for (int k = 0; k < 4; ++k) {
      const double p = r1.trace.probs[i][k];
      const double sigma = std::sqrt(std::max(p * (1 - p), 1e-4) / 600.0);
      worst = std::max(worst, std::abs(rm.trace.probs[i][k] - p) / sigma);
    }
  CHECK(worst < 5.0);
}

TEST_CASE("byte-identical outputs across runs and thread counts") {
  ExperimentConfig c = base_config(1);
  c.shots = 400;
  c.seed = 11;
  c.seed_set = true;
  c.readout = ReadoutModel::typical();
  std::vector<fs::path> dirs;
  for (int threads : {1, 1, 3}) {
    c.threads = threads;
    c.output_dir = scratch("det" + std::to_string(dirs.size()));
    RunManifest m;
    run_tomography(c, m);
    check_inventory(c.output_dir);
    dirs.push_back(c.output_dir);
  }
  for (const char* f : {"traces.csv", "density_matrix.json", "metrics.json", "grid.json"}) {
    CHECK(slurp(dirs[0] / f) == slurp(dirs[1] / f));
    CHECK(slurp(dirs[0] / f) == slurp(dirs[2] / f));
  }
}

TEST_CASE("calibrate writes a loadable schedule") {
  ExperimentConfig c = base_config(2);
  c.output_dir = scratch("calib");
  RunManifest m;
  const CalibrationTable t = run_calibrate(c, m);
  check_inventory(c.output_dir);
  const PulseSchedule s = schedule_from_yaml(YAML::LoadFile((c.output_dir / "schedule.yaml").string()));
  CalibrationTable tt = t;
  CHECK(s.duration == doctest::Approx(prepare_schedule(c, c.protocol, tt).duration));
  const CalibrationTable back = calibration_from_yaml(YAML::LoadFile((c.output_dir / "calibration.yaml").string()));
  CHECK(back.swaps.size() == t.swaps.size());
  CHECK(back.pi_pulses.size() == t.pi_pulses.size());
}

TEST_CASE("stage labels on failure") {
  ExperimentConfig c = base_config(1);
  c.output_dir = scratch("fail");
  c.protocol.kind = ProtocolKind::moon;
  c.protocol.M = 1;
  RunManifest m;
  try {
    run_moon(c, m);
    FAIL("expected an error");
  } catch (const StageError& e) {
    CHECK(e.stage() == "config");
  }
  c = base_config(1);
  c.delays = {0, 10};
  try {
    run_decay_scan(c, m);
    FAIL("expected an error");
  } catch (const StageError& e) {
    CHECK(e.stage() == "config");
  }
  c = base_config(1);
  c.calibration.min_transfer = 1.01;  // unreachable
  try {
    run_calibrate(c, m);
    FAIL("expected an error");
  } catch (const StageError& e) {
    CHECK(e.stage() == "calibrate");
  }
}

}  // TEST_SUITE
