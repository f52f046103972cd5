#include "noon/config.hpp"

#include <sstream>

namespace noon {

namespace {

template <class T>
void read(const YAML::Node& n, const char* key, T& out) {
  if (n && n[key]) out = n[key].as<T>();
}

YAML::Node complex_node(cplx z) {
  YAML::Node n;
  n.SetStyle(YAML::EmitterStyle::Flow);
  n.push_back(z.real());
  n.push_back(z.imag());
  return n;
}

cplx complex_from(const YAML::Node& n) {
  if (n.IsSequence() && n.size() == 2) return {n[0].as<double>(), n[1].as<double>()};
  if (n.IsScalar()) return {n.as<double>(), 0.0};
  throw Error("config: complex values are [re, im] pairs");
}

}  // namespace

YAML::Node device_to_yaml(const DeviceModel& d) {
  YAML::Node n;
  n["f_ref"] = d.f_ref;
  n["tphi_crossover"] = d.tphi_crossover;
  for (const auto& [name, r] : d.resonators) {
    YAML::Node x;
    x["f_r"] = r.f_r;
    x["T1"] = r.T1;
    x["Tphi"] = r.Tphi;
    n["resonators"][name] = x;
  }
  for (const auto& [name, q] : d.qubits) {
    YAML::Node x;
    x["f_ge_idle"] = q.f_ge_idle;
    x["f_nl"] = q.f_nl;
    x["T1"] = q.T1;
    x["Tphi_short"] = q.Tphi_short;
    x["Tphi_long"] = q.Tphi_long;
    n["qubits"][name] = x;
  }
  for (const auto& [key, g] : d.g_over_pi) n["g_over_pi"][key.first + "-" + key.second] = g;
  return n;
}

DeviceModel device_from_yaml(const YAML::Node& n, DeviceModel d) {
  if (!n) return d;
  read(n, "f_ref", d.f_ref);
  read(n, "tphi_crossover", d.tphi_crossover);
  if (n["resonators"])
    for (const auto& it : n["resonators"]) {
      auto& r = d.resonators[it.first.as<std::string>()];
      read(it.second, "f_r", r.f_r);
      read(it.second, "T1", r.T1);
      read(it.second, "Tphi", r.Tphi);
    }
  if (n["qubits"])
    for (const auto& it : n["qubits"]) {
      auto& q = d.qubits[it.first.as<std::string>()];
      read(it.second, "f_ge_idle", q.f_ge_idle);
      read(it.second, "f_nl", q.f_nl);
      read(it.second, "T1", q.T1);
      read(it.second, "Tphi_short", q.Tphi_short);
      read(it.second, "Tphi_long", q.Tphi_long);
    }
  if (n["g_over_pi"])
    for (const auto& it : n["g_over_pi"]) {
      const std::string key = it.first.as<std::string>();
      const auto dash = key.find('-');
      if (dash == std::string::npos) throw Error("config: coupling keys look like q0-A, got " + key);
      d.g_over_pi[{key.substr(0, dash), key.substr(dash + 1)}] = it.second.as<double>();
    }
  d.validate();
  return d;
}

YAML::Node schedule_to_yaml(const PulseSchedule& s) {
  YAML::Node n;
  n["duration"] = s.duration;
  n["tomography_phase_offset"] = s.tomography_phase_offset;
  for (const auto& [q, segs] : s.detuning)
    for (const auto& g : segs) {
      YAML::Node x;
      x.SetStyle(YAML::EmitterStyle::Flow);
      x["t_start"] = g.t_start;
      x["t_end"] = g.t_end;
      x["f_start"] = g.f_start;
      x["f_end"] = g.f_end;
      n["detuning"][q].push_back(x);
    }
  for (const auto& [q, pulses] : s.drives)
    for (const auto& p : pulses) {
      YAML::Node x;
      x["center"] = p.center;
      x["fwhm"] = p.fwhm;
      x["amplitude"] = complex_node(p.amplitude);
      x["carrier"] = to_string(p.carrier);
      x["phase"] = p.phase;
      x["carrier_offset_mhz"] = p.carrier_offset_mhz;
      n["drives"][q].push_back(x);
    }
  for (const auto& [r, ds] : s.displacements)
    for (const auto& p : ds) {
      YAML::Node x;
      x["time"] = p.time;
      x["alpha"] = complex_node(p.alpha);
      n["displacements"][r].push_back(x);
    }
  for (const auto& st : s.steps) {
    YAML::Node x;
    x.SetStyle(YAML::EmitterStyle::Flow);
    x["label"] = st.label;
    x["channel"] = st.channel;
    x["t_start"] = st.t_start;
    x["t_end"] = st.t_end;
    n["steps"].push_back(x);
  }
  return n;
}

PulseSchedule schedule_from_yaml(const YAML::Node& n) {
  PulseSchedule s;
  read(n, "duration", s.duration);
  read(n, "tomography_phase_offset", s.tomography_phase_offset);
  if (n["detuning"])
    for (const auto& it : n["detuning"])
      for (const auto& x : it.second) {
        DetuningSegment g;
        read(x, "t_start", g.t_start);
        read(x, "t_end", g.t_end);
        read(x, "f_start", g.f_start);
        read(x, "f_end", g.f_end);
        s.detuning[it.first.as<std::string>()].push_back(g);
      }
  if (n["drives"])
    for (const auto& it : n["drives"])
      for (const auto& x : it.second) {
        DrivePulse p;
        read(x, "center", p.center);
        read(x, "fwhm", p.fwhm);
        if (x["amplitude"]) p.amplitude = complex_from(x["amplitude"]);
        if (x["carrier"]) p.carrier = transition_from_string(x["carrier"].as<std::string>());
        read(x, "phase", p.phase);
        read(x, "carrier_offset_mhz", p.carrier_offset_mhz);
        s.drives[it.first.as<std::string>()].push_back(p);
      }
  if (n["displacements"])
    for (const auto& it : n["displacements"])
      for (const auto& x : it.second) {
        DisplacementPulse p;
        read(x, "time", p.time);
        if (x["alpha"]) p.alpha = complex_from(x["alpha"]);
        s.displacements[it.first.as<std::string>()].push_back(p);
      }
  if (n["steps"])
    for (const auto& x : n["steps"]) {
      ScheduleStep st;
      read(x, "label", st.label);
      read(x, "channel", st.channel);
      read(x, "t_start", st.t_start);
      read(x, "t_end", st.t_end);
      s.steps.push_back(st);
    }
  s.validate();
  return s;
}

YAML::Node protocol_to_yaml(const ProtocolSpec& p) {
  YAML::Node n;
  n["kind"] = to_string(p.kind);
  n["N"] = p.N;
  n["M"] = p.M;
  n["mixed_side"] = p.mixed_side;
  n["phase_method"] = to_string(p.phase_method);
  n["delay_before_transfer"] = p.delay_before_transfer;
  n["hold_detuning_mhz"] = p.hold_detuning_mhz;
  n["tomography_phase_offset"] = p.tomography_phase_offset;
  n["sequential_transfers"] = p.sequential_transfers;
  return n;
}

ProtocolSpec protocol_from_yaml(const YAML::Node& n) {
  ProtocolSpec p;
  if (!n) return p;
  if (n["kind"]) p.kind = protocol_kind_from_string(n["kind"].as<std::string>());
  read(n, "N", p.N);
  read(n, "M", p.M);
  read(n, "mixed_side", p.mixed_side);
  if (n["phase_method"]) p.phase_method = phase_method_from_string(n["phase_method"].as<std::string>());
  read(n, "delay_before_transfer", p.delay_before_transfer);
  read(n, "hold_detuning_mhz", p.hold_detuning_mhz);
  read(n, "tomography_phase_offset", p.tomography_phase_offset);
  read(n, "sequential_transfers", p.sequential_transfers);
  p.validate();
  return p;
}

YAML::Node calibration_to_yaml(const CalibrationTable& t) {
  YAML::Node n;
  n["swaps"] = YAML::Node(YAML::NodeType::Sequence);
  n["pi_pulses"] = YAML::Node(YAML::NodeType::Sequence);
  for (const auto& [k, v] : t.swaps) {
    YAML::Node x;
    x.SetStyle(YAML::EmitterStyle::Flow);
    x["qubit"] = k.qubit;
    x["resonator"] = k.resonator;
    x["transition"] = to_string(k.transition);
    x["n"] = k.n;
    x["duration"] = v.duration;
    x["detuning_offset_mhz"] = v.detuning_offset_mhz;
    x["transfer"] = v.transfer;
    n["swaps"].push_back(x);
  }
  for (const auto& [k, v] : t.pi_pulses) {
    YAML::Node x;
    x.SetStyle(YAML::EmitterStyle::Flow);
    x["qubit"] = k.first;
    x["transition"] = to_string(k.second);
    x["amplitude"] = v.amplitude;
    x["carrier_offset_mhz"] = v.carrier_offset_mhz;
    x["transfer"] = v.transfer;
    x["leakage"] = v.leakage;
    n["pi_pulses"].push_back(x);
  }
  return n;
}

CalibrationTable calibration_from_yaml(const YAML::Node& n) {
  CalibrationTable t;
  if (n["swaps"])
    for (const auto& x : n["swaps"]) {
      SwapKey k;
      k.qubit = x["qubit"].as<std::string>();
      k.resonator = x["resonator"].as<std::string>();
      k.transition = transition_from_string(x["transition"].as<std::string>());
      k.n = x["n"].as<int>();
      SwapCalibration v;
      read(x, "duration", v.duration);
      read(x, "detuning_offset_mhz", v.detuning_offset_mhz);
      read(x, "transfer", v.transfer);
      t.swaps[k] = v;
    }
  if (n["pi_pulses"])
    for (const auto& x : n["pi_pulses"]) {
      PiCalibration v;
      read(x, "amplitude", v.amplitude);
      read(x, "carrier_offset_mhz", v.carrier_offset_mhz);
      read(x, "transfer", v.transfer);
      read(x, "leakage", v.leakage);
      t.pi_pulses[{x["qubit"].as<std::string>(),
                   transition_from_string(x["transition"].as<std::string>())}] = v;
    }
  return t;
}

std::string emit(const YAML::Node& node) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << node;
  return std::string(out.c_str()) + "\n";
}

}  // namespace noon
