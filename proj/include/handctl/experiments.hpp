#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "handctl/encoder.hpp"
#include "handctl/hand_model.hpp"
#include "handctl/motor_map.hpp"
#include "handctl/plant.hpp"

namespace handctl {

struct JointAccuracy {
  JointId joint = joints::kIndexMcp;
  double mean_abs_error = 0.0;  // degrees
  double mean_pct_error = 0.0;  // percent of calibrated range
  int n = 0;
  double range = 0.0;           // calibrated theta_max - theta_min

  friend bool operator==(const JointAccuracy&, const JointAccuracy&) = default;
};

struct AccuracyReport {
  std::vector<JointAccuracy> joints;
  double overall_abs_error = 0.0;
  double overall_pct_error = 0.0;
  int n = 0;
  double hold = 0.0;
  std::uint64_t seed = 0;
  std::string config_hash;

  friend bool operator==(const AccuracyReport&, const AccuracyReport&) = default;
};

/// Overall means are unweighted means of the per-joint means.
void aggregate(AccuracyReport& report);

struct AccuracyOptions {
  std::vector<JointId> joints = default_joints();
  int n = 20;
  double hold = 1.5;          // seconds per target
  double average_window = 0.5;  // final part of the hold averaged into one reading
  double dt = 0.01;           // plant / encoder sample period
  int offset_readings = 10;   // rest-pose readings for the encoder offset
  int offset_burst = 10;      // samples averaged into each offset reading
  std::uint64_t seed = 0;
  ChannelMap channels = ChannelMap::Default();

  /// Index abduction/DIP/PIP/MCP and thumb CMC/MCP/IP.
  static std::vector<JointId> default_joints();
};

/// Commands random in-range angles through the linear map, holds, reads the
/// simulated magnetic encoders, and scores |expected - measured|.
AccuracyReport run_accuracy_experiment(Plant& plant, const CalibrationSet& cals, const AccuracyOptions& opts = {});

struct CouplingReport {
  int motor = 0;
  int trials = 0;
  std::uint64_t seed = 0;
  SweepStats rigid;
  SweepStats free;
  bool coupled_more_repeatable = false;  // rigid.mean_std < free.mean_std
  std::string config_hash;
};

struct CouplingOptions {
  int trials = 10;
  std::uint64_t seed = 0;
  std::optional<int> motor;  // defaults to the index curl motor
  SweepOptions sweep;
};

/// Runs identical sweeps with the plant in rigid and free coupling modes.
CouplingReport run_coupling_comparison(const HandModel& model, const PlantConfig& base, const CouplingOptions& opts = {});

struct ThermalSample {
  double time = 0.0;  // seconds
  std::array<double, kNumMotorGroups> group_c{};
};

struct ThermalGroupSummary {
  MotorGroup group = MotorGroup::Fingers;
  double peak = 0.0;
  double steady = 0.0;  // mean over the final window
  double delta = 0.0;   // steady minus starting temperature
};

struct ThermalReport {
  double hours = 0.0;
  double dt = 0.0;
  std::vector<ThermalSample> log;
  std::vector<ThermalSample> cycle_means;  // mean over each actuation cycle, stamped at its end
  std::array<ThermalGroupSummary, kNumMotorGroups> summary{};
  std::string config_hash;
};

struct ThermalOptions {
  double hours = 5.0;
  double dt = 0.1;
  double log_interval = 60.0;   // seconds
  double steady_window = 1800.0;  // seconds averaged for the steady-state column
  ActuationSchedule schedule;
};

/// Plays the endurance schedule on `plant` and logs mean temperature per motor group.
ThermalReport run_thermal_endurance(Plant& plant, const ThermalOptions& opts = {});

using Report = std::variant<AccuracyReport, CouplingReport, ThermalReport>;

enum class ReportFormat { Csv, Json };

nlohmann::json report_to_json(const Report& report);
Report report_from_json(const nlohmann::json& j);

/// Deterministic serialization; same report gives the same bytes.
std::string export_report(const Report& report, ReportFormat format);
void export_report(const Report& report, ReportFormat format, const std::string& path);

}  // namespace handctl
