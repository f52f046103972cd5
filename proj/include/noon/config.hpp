#pragma once

// YAML round trips for devices, schedules, protocol specs and calibration
// tables.  Field names follow the in-memory structs.

#include <string>

#include <yaml-cpp/yaml.h>

#include "noon/model.hpp"
#include "noon/protocol.hpp"

namespace noon {

YAML::Node device_to_yaml(const DeviceModel& device);
/// Fields present in `node` override those of `base`.
DeviceModel device_from_yaml(const YAML::Node& node, DeviceModel base = default_device());

YAML::Node schedule_to_yaml(const PulseSchedule& schedule);
PulseSchedule schedule_from_yaml(const YAML::Node& node);

YAML::Node protocol_to_yaml(const ProtocolSpec& spec);
ProtocolSpec protocol_from_yaml(const YAML::Node& node);

YAML::Node calibration_to_yaml(const CalibrationTable& table);
CalibrationTable calibration_from_yaml(const YAML::Node& node);

std::string emit(const YAML::Node& node);

}  // namespace noon
