#include "handctl/motor_map.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "handctl/errors.hpp"

namespace handctl {

void CalibrationRecord::validate() const {
  if (!std::isfinite(p_min) || !std::isfinite(p_max) || !std::isfinite(theta_min) || !std::isfinite(theta_max) ||
      !std::isfinite(c)) {
    throw ConfigError("calibration record has non-finite fields");
  }
  if (p_min == p_max) throw ConfigError("calibration record requires p_min != p_max");
  if (!(theta_min < theta_max)) throw ConfigError("calibration record requires theta_min < theta_max");
  if (!(c > 0.0)) throw ConfigError("calibration scaling factor c must be > 0");
}

double joint_to_motor(double theta, const CalibrationRecord& cal) {
  cal.validate();
  if (!std::isfinite(theta)) throw ValidationError("joint angle must be finite");
  const double fraction = (theta - cal.theta_min) / cal.theta_span();
  const double p = std::lerp(cal.p_min, cal.p_max, cal.c * fraction);
  return std::clamp(p, cal.tick_lo(), cal.tick_hi());
}

double motor_to_joint(double ticks, const CalibrationRecord& cal) {
  cal.validate();
  if (!std::isfinite(ticks)) throw ValidationError("motor position must be finite");
  const double fraction = (ticks - cal.p_min) / (cal.c * (cal.p_max - cal.p_min));
  return std::clamp(std::lerp(cal.theta_min, cal.theta_max, fraction), cal.theta_min, cal.theta_max);
}

double round_ticks(double ticks) { return static_cast<double>(std::llround(ticks)); }

void require_complete(const CalibrationSet& cals) {
  for (int m = 0; m < kNumMotors; ++m) {
    if (!cals[m]) throw ConfigError("missing calibration for motor " + std::to_string(m));
  }
}

MotorVector state_to_motor_vector(const HandModel& model, const JointState& state, const CalibrationSet& cals) {
  require_complete(cals);
  MotorVector out;
  for (int m = 0; m < kNumMotors; ++m) {
    const JointId driver = model.driving_joint(m);
    const CalibrationRecord& cal = *cals[m];
    double p = round_ticks(joint_to_motor(state[driver], cal));
    // Rounding must not step outside a record with fractional endpoints.
    const double lo = std::ceil(cal.tick_lo()), hi = std::floor(cal.tick_hi());
    if (lo <= hi) p = std::clamp(p, lo, hi);
    out[m] = p;
  }
  return out;
}

}  // namespace handctl
