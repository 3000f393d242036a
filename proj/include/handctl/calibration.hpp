#pragma once

#include <optional>
#include <span>

#include "handctl/hand_model.hpp"
#include "handctl/motor_map.hpp"
#include "handctl/plant.hpp"

namespace handctl {

struct CalibrationProcedureConfig {
  double step = 5.0;  // ticks per probe
  int debounce = 3;   // consecutive tensioned samples required
  std::optional<double> tension_threshold;  // load units; default 5x idle load sigma
  double settle_time = 0.05;                // seconds held at each probe
  int samples_per_probe = 1;                // readings averaged per probe
  int idle_samples = 50;                    // load samples for the noise estimate
  int direction = 1;                        // winding: +1 if tension grows with ticks
  std::optional<double> start;              // first probe; defaults to the current motor position
  double max_travel = 4000.0;               // ticks before giving up
  double safety_ceiling = 40.0;             // load units
  double stall_delta = 0.05;                // degrees gained over the stall window
  int stall_steps = 3;                      // probes in the stall window

  void validate() const;
};

/// Probes `motor` from the released side: p_min is the last probe before the
/// load stays above threshold for `debounce` samples, p_max the first probe
/// after which the observed angle gains less than stall_delta over
/// `stall_steps` further probes.
/// theta_min/theta_max are the angles observed there; c = 1.
/// Requires exclusive use of `plant`; leaves the motor back at p_min.
CalibrationRecord auto_calibrate_motor(Plant& plant, int motor, const CalibrationProcedureConfig& cfg = {});

CalibrationSet auto_calibrate_all(Plant& plant, const CalibrationProcedureConfig& cfg = {});

/// Defaults, with samples_per_probe raised on a noisy plant so the averaged
/// angle noise (sigma / sqrt(n)) stays near a quarter of stall_delta.
CalibrationProcedureConfig procedure_for(const PlantConfig& plant);

/// mean(readings) - theta_min, so that raw - offset maps the rest pose to theta_min.
/// Throws ValidationError on empty input, UnstablePoseError if spread > 2 degrees.
double encoder_offset_calibrate(std::span<const double> readings, double theta_min);

inline double encoder_offset_calibrate(std::span<const double> readings, const HandModel& model, JointId joint) {
  return encoder_offset_calibrate(readings, model.limits_of(joint).theta_min);
}

}  // namespace handctl
