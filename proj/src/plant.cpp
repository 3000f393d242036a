#include "handctl/plant.hpp"

#include <cmath>
#include <numeric>

#include "handctl/errors.hpp"

namespace handctl {
namespace {

constexpr int kFirstWristMotor = 14;

// Endurance steady-state targets per group (fingers, thumb, wrist), degC.
constexpr std::array<double, kNumMotorGroups> kSteadyTargets{30.35, 46.97, 43.80};

double sign_of(double v) { return v < 0 ? -1.0 : 1.0; }

int curl_finger_slot(Finger f) {
  switch (f) {
    case Finger::Index: return 0;
    case Finger::Middle: return 1;
    case Finger::Ring: return 2;
    case Finger::Pinky: return 3;
    default: return -1;
  }
}

}  // namespace

MotorGroup motor_group(int motor) {
  if (motor < 0 || motor >= kNumMotors) throw ConfigError("motor index out of range");
  if (motor <= 2) return MotorGroup::Thumb;
  if (motor >= kFirstWristMotor) return MotorGroup::Wrist;
  return MotorGroup::Fingers;
}

const char* to_string(MotorGroup group) {
  switch (group) {
    case MotorGroup::Fingers: return "fingers";
    case MotorGroup::Thumb: return "thumb";
    case MotorGroup::Wrist: return "wrist";
  }
  return "?";
}

void ThermalParams::validate() const {
  if (!(r_th > 0.0) || !(c_th > 0.0)) throw ConfigError("thermal R_th and C_th must be > 0");
  if (!std::isfinite(ambient_c) || !std::isfinite(p_active) || !std::isfinite(p_idle)) {
    throw ConfigError("thermal parameters must be finite");
  }
}

double thermal_step(double temp_c, bool active, double dt, const ThermalParams& params) {
  const double power = active ? params.p_active : params.p_idle;
  return temp_c + dt / params.c_th * (power - (temp_c - params.ambient_c) / params.r_th);
}

ThermalParams fit_thermal_params(double target_c, double duty, ThermalParams base) {
  if (!(duty > 0.0 && duty <= 1.0)) throw ConfigError("duty must be in (0, 1]");
  const double mean_power = (target_c - base.ambient_c) / base.r_th;
  base.p_active = base.p_idle + (mean_power - base.p_idle) / duty;
  return base;
}

double ActuationSchedule::cycle() const { return (kFirstWristMotor * finger_slot) + wrist_slot; }

bool ActuationSchedule::active(int motor, double t) const {
  const double phase = std::fmod(t, cycle());
  if (motor >= kFirstWristMotor) return phase >= kFirstWristMotor * finger_slot;
  return phase >= motor * finger_slot && phase < (motor + 1) * finger_slot;
}

double ActuationSchedule::command(int motor, double t, const CalibrationRecord& truth) const {
  const double phase = std::fmod(t, cycle());
  if (!active(motor, t)) return truth.p_min;
  if (motor >= kFirstWristMotor) {
    // Back and forth between the two ends of the wrist range.
    const double local = std::fmod(phase - kFirstWristMotor * finger_slot, wrist_period);
    return local < wrist_period / 2 ? truth.p_max : truth.p_min;
  }
  const double local = phase - motor * finger_slot;
  return local < finger_slot / 2 ? truth.p_max : truth.p_min;
}

double ActuationSchedule::duty(int motor) const {
  return (motor >= kFirstWristMotor ? wrist_slot : finger_slot) / cycle();
}

void PlantConfig::validate() const {
  for (int m = 0; m < kNumMotors; ++m) {
    motors[m].truth.validate();
    if (!(motors[m].slack >= 0.0) || !(motors[m].coulomb_band >= 0.0)) {
      throw ConfigError("slack and coulomb_band must be >= 0 (motor " + std::to_string(m) + ")");
    }
  }
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
  if (!(uncoupled_ratio_jitter >= 0.0) || !(uncoupled_dip_band >= 0.0)) {
    throw ConfigError("uncoupled jitter and band must be >= 0");
  }
  if (!(load_noise_sigma >= 0.0)) throw ConfigError("load_noise_sigma must be >= 0");
  if (!(max_speed > 0.0)) throw ConfigError("max_speed must be > 0");
  if (!(travel_min < travel_max)) throw ConfigError("travel range must be non-empty");
  for (const auto& t : thermal) t.validate();
}

PlantConfig PlantConfig::Ideal(const HandModel& model) {
  // Tension point / hard stop per motor, ticks.
  static constexpr std::array<std::array<double, 2>, kNumMotors> kTicks{{
      {900, 3400}, {1000, 2500}, {1000, 2800},                // thumb CMC, MCP, IP
      {1800, 2400}, {1000, 3200}, {1000, 3000},               // index abd, MCP, curl
      {1000, 3200}, {1000, 3000},                             // middle MCP, curl
      {1800, 2450}, {1000, 3200}, {1000, 3000},               // ring
      {1700, 2600}, {1000, 3200}, {1000, 3000},               // pinky
      {1500, 2600}, {1500, 2500},                             // wrist FE, RUD
  }};
  PlantConfig cfg;
  for (int m = 0; m < kNumMotors; ++m) {
    const JointLimits& lim = model.limits_of(model.driving_joint(m));
    cfg.motors[m].truth = {kTicks[m][0], kTicks[m][1], lim.theta_min, lim.theta_max, 1.0};
  }
  for (auto& t : cfg.thermal) t = ThermalParams{25.0, 2.0, 300.0, 0.0, 0.0};
  cfg.validate();
  return cfg;
}

PlantConfig PlantConfig::Default(const HandModel& model) {
  PlantConfig cfg = Ideal(model);
  cfg.noise_sigma = 0.05;
  cfg.load_noise_sigma = 0.01;
  cfg.seed = 1;
  const ActuationSchedule schedule;
  // Idle holding power per group; active power is fitted to the endurance targets.
  constexpr std::array<double, kNumMotorGroups> kIdle{2.5, 10.0, 8.0};
  constexpr std::array<int, kNumMotorGroups> kRepresentative{3, 0, kFirstWristMotor};
  for (int g = 0; g < kNumMotorGroups; ++g) {
    cfg.thermal[g] = fit_thermal_params(kSteadyTargets[g], schedule.duty(kRepresentative[g]),
                                        ThermalParams{25.0, 2.0, 300.0, 0.0, kIdle[g]});
  }
  cfg.validate();
  return cfg;
}

PlantConfig PlantConfig::FittedRegime(const HandModel& model) {
  using namespace joints;
  PlantConfig cfg = Default(model);
  cfg.noise_sigma = 0.5;
  cfg.seed = 7;
  // Spans this build reaches after calibration, below the nominal ranges.
  struct Override {
    int motor;
    double span;
    double play;  // ticks
  };
  const Override overrides[] = {
      {model.motor_of(kIndexAbd), 20.0, 135.0}, {model.motor_of(kIndexMcp), 140.0, 380.0},
      {model.motor_of(kIndexPip), 100.0, 480.0}, {model.motor_of(kThumbCmc), 105.0, 480.0},
      {model.motor_of(kThumbMcp), 68.0, 400.0},  {model.motor_of(kThumbIp), 55.0, 340.0},
  };
  for (const auto& o : overrides) {
    auto& mp = cfg.motors[o.motor];
    mp.truth.theta_max = mp.truth.theta_min + o.span;
    mp.slack = 0.6 * o.play;
    mp.coulomb_band = 0.4 * o.play;
  }
  cfg.validate();
  return cfg;
}

CalibrationSet PlantConfig::truth_calibrations() const {
  CalibrationSet set;
  for (int m = 0; m < kNumMotors; ++m) set[m] = motors[m].truth;
  return set;
}

PlantState initial_plant_state(const HandModel& model, const PlantConfig& cfg) {
  PlantState s;
  for (int m = 0; m < kNumMotors; ++m) {
    const auto& mp = cfg.motors[m];
    const double dir = sign_of(mp.truth.p_max - mp.truth.p_min);
    s.command[m] = mp.truth.p_min;
    s.motor_pos[m] = mp.truth.p_min;
    s.engaged[m] = mp.truth.p_min - dir * mp.play();
    s.temps[m] = cfg.thermal[static_cast<int>(motor_group(m))].ambient_c;
  }
  for (int i = 0; i < kNumJoints; ++i) s.joint_angles.angles[i] = model.limits[i].theta_min;
  for (int m = 0; m < kNumMotors; ++m) {
    s.joint_angles[model.driving_joint(m)] = cfg.motors[m].truth.theta_min;
  }
  s.joint_angles = clamp_to_limits(model, s.joint_angles);
  s.measured = s.joint_angles;
  return s;
}

PlantState plant_step(const HandModel& model, const PlantConfig& cfg, const PlantState& state,
                      const MotorVector& cmd, double dt, PlantRng& rng,
                      const std::optional<std::bitset<kNumMotors>>& active) {
  PlantState next = state;
  next.time = state.time + dt;
  next.command = cmd;
  const double max_move = cfg.max_speed * dt;
  std::normal_distribution<double> unit(0.0, 1.0);

  for (int m = 0; m < kNumMotors; ++m) {
    const auto& mp = cfg.motors[m];
    const CalibrationRecord& truth = mp.truth;
    const double dir = sign_of(truth.p_max - truth.p_min);

    const double target = std::clamp(cmd[m], cfg.travel_min, cfg.travel_max);
    const double prev_pos = state.motor_pos[m];
    next.motor_pos[m] = prev_pos + std::clamp(target - prev_pos, -max_move, max_move);

    // Play element in the winding direction: engaged trails the motor by up to `play`.
    const double u = dir * next.motor_pos[m];
    double ue = dir * state.engaged[m];
    if (u - ue > mp.play()) ue = u - mp.play();
    if (u < ue) ue = u;
    next.engaged[m] = dir * ue;

    const double past_tension = std::max(0.0, ue - dir * truth.p_min);
    const double past_stop = std::max(0.0, ue - dir * truth.p_max);
    double load = cfg.tension_stiffness * (past_tension - past_stop) + cfg.stop_stiffness * past_stop;
    if (cfg.load_noise_sigma > 0) load += cfg.load_noise_sigma * unit(rng);
    next.load[m] = load;

    const bool moving = std::abs(next.motor_pos[m] - prev_pos) > 1e-9;
    next.active[m] = active ? (*active)[m] : (moving || past_tension > 0.5);

    const ThermalParams& tp = cfg.thermal[static_cast<int>(motor_group(m))];
    next.temps[m] = thermal_step(state.temps[m], next.active[m], dt, tp);

    const JointId driver = model.driving_joint(m);
    next.joint_angles[driver] = motor_to_joint(next.engaged[m], truth);
  }

  for (const auto& [pip, dip] : model.coupling) {
    const int slot = curl_finger_slot(pip.finger);
    if (cfg.coupling_mode == PlantCoupling::RigidCoupled) {
      next.joint_angles[dip] = next.joint_angles[pip];
      next.dip_engaged[slot] = next.joint_angles[dip];
    } else {
      const double target = state.dip_ratio[slot] * next.joint_angles[pip];
      double d = state.dip_engaged[slot];
      if (target - d > cfg.uncoupled_dip_band) d = target - cfg.uncoupled_dip_band;
      if (target < d) d = target;
      next.dip_engaged[slot] = d;
      next.joint_angles[dip] = d;
    }
  }
  next.joint_angles = clamp_to_limits(model, next.joint_angles);

  next.measured = next.joint_angles;
  if (cfg.noise_sigma > 0) {
    for (int i = 0; i < kNumJoints; ++i) next.measured.angles[i] += cfg.noise_sigma * unit(rng);
  }
  return next;
}

Plant::Plant(HandModel model, PlantConfig cfg) : model_(std::move(model)), cfg_(std::move(cfg)) {
  model_.validate();
  cfg_.validate();
  reset();
}

void Plant::reset() {
  rng_.seed(cfg_.seed);
  state_ = initial_plant_state(model_, cfg_);
}

void Plant::step(const MotorVector& cmd, double dt, const std::optional<std::bitset<kNumMotors>>& active) {
  if (!(dt > 0.0)) throw ValidationError("plant step requires dt > 0");
  state_ = plant_step(model_, cfg_, state_, cmd, dt, rng_, active);
}

void Plant::settle(double duration, double dt) {
  const MotorVector cmd = state_.command;
  const long steps = std::lround(duration / dt);
  for (long i = 0; i < steps; ++i) step(cmd, dt);
}

void Plant::begin_trial() {
  if (cfg_.coupling_mode != PlantCoupling::FreeUncoupled) return;
  std::uniform_real_distribution<double> ratio(1.0 - cfg_.uncoupled_ratio_jitter, 1.0 + cfg_.uncoupled_ratio_jitter);
  for (auto& r : state_.dip_ratio) r = ratio(rng_);
}

JointId observed_joint(const HandModel& model, int motor) {
  const JointId driver = model.driving_joint(motor);
  for (const auto& [pip, dip] : model.coupling) {
    if (pip == driver) return dip;
  }
  return driver;
}

SweepTrajectory run_sweep(Plant& plant, int motor, int cycles, const SweepOptions& opts) {
  if (cycles < 1) throw ValidationError("sweep requires at least one cycle");
  if (opts.points_per_direction < 2) throw ValidationError("sweep needs at least two points per direction");
  const CalibrationRecord& truth = plant.config().motors[motor].truth;
  const JointId joint = observed_joint(plant.model(), motor);

  SweepTrajectory traj;
  traj.motor = motor;
  traj.points_per_direction = opts.points_per_direction;

  std::vector<double> grid(opts.points_per_direction);
  for (int i = 0; i < opts.points_per_direction; ++i) {
    const double f = static_cast<double>(i) / (opts.points_per_direction - 1);
    grid[i] = round_ticks(truth.p_min + f * (truth.p_max - truth.p_min));
  }

  MotorVector cmd = plant.state().command;
  auto visit = [&](double ticks, int trial, SweepDirection dir) {
    cmd[motor] = ticks;
    plant.step(cmd, opts.dt);
    plant.settle(opts.settle - opts.dt, opts.dt);
    traj.samples.push_back({trial, dir, ticks, plant.state().measured[joint]});
  };

  for (int trial = 0; trial < cycles; ++trial) {
    // Home to the released end before each trial.
    cmd[motor] = grid.front();
    plant.step(cmd, opts.dt);
    plant.settle(1.0, opts.dt);
    plant.begin_trial();
    for (double t : grid) visit(t, trial, SweepDirection::Forward);
    for (auto it = grid.rbegin(); it != grid.rend(); ++it) visit(*it, trial, SweepDirection::Reverse);
  }
  return traj;
}

SweepStats summarize_sweep(const SweepTrajectory& traj) {
  const int n = traj.points_per_direction;
  SweepStats st;
  st.cmd.resize(n);
  std::vector<std::vector<double>> fwd(n), rev(n);
  int trials = 0;
  for (const auto& s : traj.samples) trials = std::max(trials, s.trial + 1);

  // Samples are laid out trial-major: n forward then n reverse (reverse in descending order).
  for (std::size_t i = 0; i < traj.samples.size(); ++i) {
    const auto& s = traj.samples[i];
    const int k = static_cast<int>(i % (2 * n));
    if (k < n) {
      fwd[k].push_back(s.angle_deg);
      st.cmd[k] = s.cmd_ticks;
    } else {
      rev[2 * n - 1 - k].push_back(s.angle_deg);
    }
  }

  auto mean_std = [](const std::vector<double>& v, double& mean, double& sd) {
    mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  };
  st.forward_mean.resize(n);
  st.forward_std.resize(n);
  st.reverse_mean.resize(n);
  st.reverse_std.resize(n);
  double std_sum = 0.0;
  for (int k = 0; k < n; ++k) {
    mean_std(fwd[k], st.forward_mean[k], st.forward_std[k]);
    mean_std(rev[k], st.reverse_mean[k], st.reverse_std[k]);
    std_sum += st.forward_std[k] + st.reverse_std[k];
  }
  st.mean_std = std_sum / (2.0 * n);

  double area_sum = 0.0;
  for (int t = 0; t < trials; ++t) {
    double area = 0.0;
    for (int k = 0; k + 1 < n; ++k) {
      const double g0 = rev[k][t] - fwd[k][t];
      const double g1 = rev[k + 1][t] - fwd[k + 1][t];
      area += 0.5 * (g0 + g1) * (st.cmd[k + 1] - st.cmd[k]);
    }
    area_sum += std::abs(area);
  }
  st.loop_area = trials > 0 ? area_sum / trials : 0.0;
  return st;
}

}  // namespace handctl
