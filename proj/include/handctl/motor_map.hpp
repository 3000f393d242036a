#pragma once

#include <array>
#include <optional>

#include <Eigen/Dense>

#include "handctl/hand_model.hpp"

namespace handctl {

/// Per-motor linear joint<->tick mapping. p_min may exceed p_max for a
/// reversed tendon winding.
struct CalibrationRecord {
  double p_min = 0.0;  // ticks at first tendon tension (theta_min)
  double p_max = 0.0;  // ticks at the curled mechanical limit (theta_max)
  double theta_min = 0.0;  // degrees
  double theta_max = 0.0;
  double c = 1.0;  // effort / underestimation compensation

  double tick_lo() const { return std::min(p_min, p_max); }
  double tick_hi() const { return std::max(p_min, p_max); }
  double theta_span() const { return theta_max - theta_min; }

  /// Throws ConfigError unless p_min != p_max, theta_min < theta_max, c > 0, all finite.
  void validate() const;

  friend bool operator==(const CalibrationRecord&, const CalibrationRecord&) = default;
};

using MotorVector = Eigen::Matrix<double, kNumMotors, 1>;

/// One optional record per motor; a missing entry is a configuration error at use.
using CalibrationSet = std::array<std::optional<CalibrationRecord>, kNumMotors>;

/// p = p_min + c * (theta - theta_min) / (theta_max - theta_min) * (p_max - p_min),
/// clamped into the record's tick interval. Continuous (unrounded) ticks.
double joint_to_motor(double theta, const CalibrationRecord& cal);

/// Matched inverse of joint_to_motor for the same c, clamped to [theta_min, theta_max].
double motor_to_joint(double ticks, const CalibrationRecord& cal);

/// Nearest integral tick, ties away from zero.
double round_ticks(double ticks);

/// Per-motor command from each motor's driving joint, rounded to whole ticks.
/// Coupled curl motors are driven by the PIP angle.
MotorVector state_to_motor_vector(const HandModel& model, const JointState& state, const CalibrationSet& cals);

/// Require a record for every motor; throws ConfigError naming the first gap.
void require_complete(const CalibrationSet& cals);

}  // namespace handctl
