#include "handctl/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "handctl/errors.hpp"

namespace handctl {

void CalibrationProcedureConfig::validate() const {
  if (!(step > 0.0)) throw ConfigError("calibration step must be > 0");
  if (debounce < 1) throw ConfigError("calibration debounce must be >= 1");
  if (samples_per_probe < 1 || idle_samples < 1) throw ConfigError("calibration sample counts must be >= 1");
  if (direction != 1 && direction != -1) throw ConfigError("calibration direction must be +1 or -1");
  if (!(settle_time >= 0.0) || !(max_travel > 0.0) || stall_steps < 1) {
    throw ConfigError("invalid calibration timing or travel");
  }
}

namespace {

struct Probe {
  double load = 0.0;
  double angle = 0.0;
};

class Prober {
 public:
  Prober(Plant& plant, int motor, const CalibrationProcedureConfig& cfg)
      : plant_(plant), motor_(motor), cfg_(cfg), joint_(observed_joint(plant.model(), motor)) {}

  Probe at(double ticks) {
    MotorVector cmd = plant_.state().command;
    cmd[motor_] = ticks;
    constexpr double dt = 0.01;
    const PlantConfig& pc = plant_.config();
    const double target = std::clamp(ticks, pc.travel_min, pc.travel_max);
    plant_.step(cmd, dt);
    while (plant_.state().motor_pos[motor_] != target) plant_.step(cmd, dt);
    plant_.settle(std::max(0.0, cfg_.settle_time - dt), dt);
    Probe p;
    for (int i = 0; i < cfg_.samples_per_probe; ++i) {
      if (i > 0) plant_.step(cmd, dt);
      p.load += plant_.state().load[motor_];
      p.angle += plant_.state().measured[joint_];
    }
    p.load /= cfg_.samples_per_probe;
    p.angle /= cfg_.samples_per_probe;
    if (p.load > cfg_.safety_ceiling) {
      throw CalibrationError("motor " + std::to_string(motor_) + ": load " + std::to_string(p.load) +
                             " exceeded safety ceiling " + std::to_string(cfg_.safety_ceiling) + " at " +
                             std::to_string(ticks) + " ticks");
    }
    return p;
  }

 private:
  Plant& plant_;
  int motor_;
  const CalibrationProcedureConfig& cfg_;
  JointId joint_;
};

}  // namespace

CalibrationRecord auto_calibrate_motor(Plant& plant, int motor, const CalibrationProcedureConfig& cfg) {
  cfg.validate();
  if (motor < 0 || motor >= kNumMotors) throw ConfigError("motor index out of range");
  Prober probe(plant, motor, cfg);
  const double start = cfg.start.value_or(plant.state().motor_pos[motor]);
  const double dir = cfg.direction;

  // Idle load statistics at the start position.
  Probe first = probe.at(start);
  double threshold = 0.0;
  if (cfg.tension_threshold) {
    threshold = *cfg.tension_threshold;
  } else {
    std::vector<double> idle{first.load};
    for (int i = 1; i < cfg.idle_samples; ++i) idle.push_back(probe.at(start).load);
    const double mean = std::accumulate(idle.begin(), idle.end(), 0.0) / idle.size();
    double ss = 0.0;
    for (double x : idle) ss += (x - mean) * (x - mean);
    threshold = mean + 5.0 * std::sqrt(ss / idle.size());
  }

  std::optional<double> p_min, p_max;
  double theta_at_min = 0.0, theta_at_max = 0.0;
  int tensioned = 0;
  std::vector<double> pos{start}, angle{first.angle};
  std::size_t min_index = 0;

  const int max_probes = static_cast<int>(std::ceil(cfg.max_travel / cfg.step));
  for (int k = 1; k <= max_probes; ++k) {
    const double p = start + dir * k * cfg.step;
    const Probe cur = probe.at(p);
    pos.push_back(p);
    angle.push_back(cur.angle);

    if (!p_min) {
      tensioned = cur.load > threshold ? tensioned + 1 : 0;
      if (tensioned >= cfg.debounce) {
        min_index = pos.size() - 1 - static_cast<std::size_t>(cfg.debounce);
        p_min = pos[min_index];
        theta_at_min = angle[min_index];
      }
      continue;
    }
    // Mechanical limit: less than stall_delta gained over the last stall_steps probes.
    const std::size_t i = angle.size() - 1;
    const auto s = static_cast<std::size_t>(cfg.stall_steps);
    if (i >= min_index + s && angle[i] - angle[i - s] < cfg.stall_delta) {
      p_max = pos[i - s];
      theta_at_max = angle[i - s];
      break;
    }
  }

  if (!p_min) throw CalibrationError("motor " + std::to_string(motor) + ": no tendon tension detected within travel");
  if (!p_max) throw CalibrationError("motor " + std::to_string(motor) + ": no mechanical limit detected within travel");

  // Release back to the tension point.
  probe.at(*p_min);

  CalibrationRecord rec{*p_min, *p_max, theta_at_min, theta_at_max, 1.0};
  if (!(rec.theta_min < rec.theta_max)) {
    throw CalibrationError("motor " + std::to_string(motor) + ": observed no angular travel");
  }
  return rec;
}

CalibrationSet auto_calibrate_all(Plant& plant, const CalibrationProcedureConfig& cfg) {
  CalibrationSet set;
  for (int m = 0; m < kNumMotors; ++m) set[m] = auto_calibrate_motor(plant, m, cfg);
  return set;
}

CalibrationProcedureConfig procedure_for(const PlantConfig& plant) {
  CalibrationProcedureConfig proc;
  if (plant.noise_sigma > 0.0) {
    const double needed = std::ceil(std::pow(4.0 * plant.noise_sigma / proc.stall_delta, 2.0));
    proc.samples_per_probe = static_cast<int>(std::clamp(needed, 1.0, 400.0));
  }
  return proc;
}

double encoder_offset_calibrate(std::span<const double> readings, double theta_min) {
  if (readings.empty()) throw ValidationError("offset calibration requires at least one reading");
  const auto [lo, hi] = std::minmax_element(readings.begin(), readings.end());
  if (*hi - *lo > 2.0) {
    throw UnstablePoseError("offset calibration readings spread " + std::to_string(*hi - *lo) + " deg (> 2 deg)");
  }
  const double mean = std::accumulate(readings.begin(), readings.end(), 0.0) / static_cast<double>(readings.size());
  return mean - theta_min;
}

}  // namespace handctl
