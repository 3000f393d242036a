#include "handctl/experiments.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "handctl/calibration.hpp"
#include "handctl/config_io.hpp"
#include "handctl/errors.hpp"

namespace handctl {

using nlohmann::json;

std::vector<JointId> AccuracyOptions::default_joints() {
  using namespace joints;
  return {kIndexAbd, kIndexDip, kIndexPip, kIndexMcp, kThumbCmc, kThumbMcp, kThumbIp};
}

void aggregate(AccuracyReport& report) {
  double abs_sum = 0.0, pct_sum = 0.0;
  for (const auto& j : report.joints) {
    abs_sum += j.mean_abs_error;
    pct_sum += j.mean_pct_error;
  }
  const double n = static_cast<double>(report.joints.size());
  report.overall_abs_error = report.joints.empty() ? 0.0 : abs_sum / n;
  report.overall_pct_error = report.joints.empty() ? 0.0 : pct_sum / n;
}

AccuracyReport run_accuracy_experiment(Plant& plant, const CalibrationSet& cals, const AccuracyOptions& opts) {
  if (opts.n < 1) throw ValidationError("accuracy experiment needs n >= 1");
  if (!(opts.hold > 0.0) || !(opts.dt > 0.0)) throw ValidationError("hold and dt must be > 0");
  if (opts.offset_readings < 1 || opts.offset_burst < 1) throw ValidationError("offset calibration needs samples");
  const HandModel& model = plant.model();

  AccuracyReport report;
  report.n = opts.n;
  report.hold = opts.hold;
  report.seed = opts.seed;
  const json cfg_json = {{"plant", to_json(plant.config())},
                         {"model", to_json(model)},
                         {"calibration", to_json(CalibrationFile{cals, {}})}};
  report.config_hash = hex64(config_hash(cfg_json));

  std::mt19937_64 rng(opts.seed);
  plant.reset();

  // Rest every motor at its calibrated tension point.
  MotorVector cmd = plant.state().command;
  for (const JointId j : opts.joints) {
    const int m = model.motor_of(j);
    if (!cals[m]) throw ConfigError("missing calibration for motor " + std::to_string(m) + " (" + to_string(j) + ")");
    if (!opts.channels.channel_of(j)) throw ConfigError("no encoder channel mapped for " + to_string(j));
    cmd[m] = round_ticks(cals[m]->p_min);
  }
  plant.step(cmd, opts.dt);
  plant.settle(1.0, opts.dt);

  const long hold_steps = std::lround(opts.hold / opts.dt);
  const long window_steps = std::max(1L, std::lround(opts.average_window / opts.dt));
  std::uint8_t seq = 0;

  for (const JointId joint : opts.joints) {
    const int motor = model.motor_of(joint);
    const CalibrationRecord& cal = *cals[motor];
    const int channel = *opts.channels.channel_of(joint);

    // Magnets land at an arbitrary pole angle when mounted.
    std::uniform_real_distribution<double> pole(0.0, 360.0);
    const SimulatedEncoder sensor{pole(rng), (rng() & 1) ? 1 : -1};

    auto read_degrees = [&]() {
      const FrameBytes bytes = encode_frame({static_cast<std::uint8_t>(channel),
                                             sensor.read_raw(plant.state().measured[joint]), seq++, 0});
      return raw_to_degrees(decode_frame(bytes).raw);
    };

    // Offset calibration at the rest pose; each reading averages a short burst.
    std::vector<double> rest;
    double prev = read_degrees();
    for (int i = 0; i < opts.offset_readings; ++i) {
      double burst = 0.0;
      for (int k = 0; k < opts.offset_burst; ++k) {
        plant.step(cmd, opts.dt);
        prev = unwrap_degrees(prev, read_degrees());
        burst += prev;
      }
      rest.push_back(sensor.direction * burst / opts.offset_burst);
    }
    ChannelTracker tracker({encoder_offset_calibrate(rest, cal.theta_min), sensor.direction, joint});
    tracker.update(read_degrees());

    std::uniform_real_distribution<double> target(cal.theta_min, cal.theta_max);
    double abs_sum = 0.0;
    for (int i = 0; i < opts.n; ++i) {
      const double expected = target(rng);
      cmd[motor] = round_ticks(joint_to_motor(expected, cal));
      double acc = 0.0;
      for (long s = 0; s < hold_steps; ++s) {
        plant.step(cmd, opts.dt);
        const double reading = tracker.update(read_degrees());
        if (s >= hold_steps - window_steps) acc += reading;
      }
      abs_sum += std::abs(expected - acc / static_cast<double>(window_steps));
    }

    cmd[motor] = round_ticks(cal.p_min);
    plant.step(cmd, opts.dt);
    plant.settle(1.0, opts.dt);

    JointAccuracy ja;
    ja.joint = joint;
    ja.n = opts.n;
    ja.range = cal.theta_span();
    ja.mean_abs_error = abs_sum / opts.n;
    ja.mean_pct_error = 100.0 * ja.mean_abs_error / ja.range;
    report.joints.push_back(ja);
  }
  aggregate(report);
  return report;
}

CouplingReport run_coupling_comparison(const HandModel& model, const PlantConfig& base, const CouplingOptions& opts) {
  if (opts.trials < 2) throw ValidationError("coupling comparison needs at least 2 trials");
  const int motor = opts.motor.value_or(model.motor_of(joints::kIndexPip));

  CouplingReport report;
  report.motor = motor;
  report.trials = opts.trials;
  report.seed = opts.seed;
  report.config_hash = hex64(config_hash(to_json(base)));

  auto run_mode = [&](PlantCoupling mode) {
    PlantConfig cfg = base;
    cfg.coupling_mode = mode;
    cfg.seed = opts.seed;
    Plant plant(model, cfg);
    return summarize_sweep(run_sweep(plant, motor, opts.trials, opts.sweep));
  };
  report.rigid = run_mode(PlantCoupling::RigidCoupled);
  report.free = run_mode(PlantCoupling::FreeUncoupled);
  report.coupled_more_repeatable = report.rigid.mean_std < report.free.mean_std;
  return report;
}

ThermalReport run_thermal_endurance(Plant& plant, const ThermalOptions& opts) {
  if (!(opts.hours > 0.0) || !(opts.dt > 0.0)) throw ValidationError("thermal run needs hours > 0 and dt > 0");
  plant.reset();
  const PlantConfig& cfg = plant.config();

  ThermalReport report;
  report.hours = opts.hours;
  report.dt = opts.dt;
  report.config_hash = hex64(config_hash(to_json(cfg)));

  auto group_means = [&]() {
    std::array<double, kNumMotorGroups> sum{};
    std::array<int, kNumMotorGroups> count{};
    for (int m = 0; m < kNumMotors; ++m) {
      const int g = static_cast<int>(motor_group(m));
      sum[g] += plant.state().temps[m];
      ++count[g];
    }
    for (int g = 0; g < kNumMotorGroups; ++g) sum[g] /= count[g];
    return sum;
  };

  const auto start = group_means();
  std::array<double, kNumMotorGroups> peak = start;
  std::array<double, kNumMotorGroups> window_sum{};
  long window_count = 0;

  const double duration = opts.hours * 3600.0;
  const long steps = std::lround(duration / opts.dt);
  const long log_every = std::max(1L, std::lround(opts.log_interval / opts.dt));
  const double window_start = duration - std::min(opts.steady_window, duration);
  report.log.push_back({0.0, start});
  const double cycle = opts.schedule.cycle();
  std::array<double, kNumMotorGroups> cycle_sum{};
  long cycle_count = 0;
  long cycle_index = 0;

  MotorVector cmd;
  std::bitset<kNumMotors> active;
  for (long k = 0; k < steps; ++k) {
    const double t = k * opts.dt;
    for (int m = 0; m < kNumMotors; ++m) {
      cmd[m] = opts.schedule.command(m, t, cfg.motors[m].truth);
      active[m] = opts.schedule.active(m, t);
    }
    plant.step(cmd, opts.dt, active);
    const auto means = group_means();
    for (int g = 0; g < kNumMotorGroups; ++g) peak[g] = std::max(peak[g], means[g]);
    if (t + opts.dt > window_start) {
      for (int g = 0; g < kNumMotorGroups; ++g) window_sum[g] += means[g];
      ++window_count;
    }
    if ((k + 1) % log_every == 0) report.log.push_back({(k + 1) * opts.dt, means});

    for (int g = 0; g < kNumMotorGroups; ++g) cycle_sum[g] += means[g];
    ++cycle_count;
    const double t_end = (k + 1) * opts.dt;
    if (t_end >= (cycle_index + 1) * cycle - 1e-9) {
      ThermalSample c{(cycle_index + 1) * cycle, {}};
      for (int g = 0; g < kNumMotorGroups; ++g) c.group_c[g] = cycle_sum[g] / static_cast<double>(cycle_count);
      report.cycle_means.push_back(c);
      cycle_sum = {};
      cycle_count = 0;
      ++cycle_index;
    }
  }

  for (int g = 0; g < kNumMotorGroups; ++g) {
    auto& s = report.summary[g];
    s.group = static_cast<MotorGroup>(g);
    s.peak = peak[g];
    s.steady = window_sum[g] / static_cast<double>(std::max(1L, window_count));
    s.delta = s.steady - start[g];
  }
  return report;
}

// Serialization.

namespace {

json stats_json(const SweepStats& s) {
  return {{"cmd", s.cmd},
          {"forward_mean", s.forward_mean},
          {"forward_std", s.forward_std},
          {"reverse_mean", s.reverse_mean},
          {"reverse_std", s.reverse_std},
          {"mean_std", s.mean_std},
          {"loop_area", s.loop_area}};
}

SweepStats stats_from(const json& j) {
  SweepStats s;
  s.cmd = j.at("cmd").get<std::vector<double>>();
  s.forward_mean = j.at("forward_mean").get<std::vector<double>>();
  s.forward_std = j.at("forward_std").get<std::vector<double>>();
  s.reverse_mean = j.at("reverse_mean").get<std::vector<double>>();
  s.reverse_std = j.at("reverse_std").get<std::vector<double>>();
  s.mean_std = j.at("mean_std").get<double>();
  s.loop_area = j.at("loop_area").get<double>();
  return s;
}

MotorGroup group_from(const std::string& name) {
  for (int g = 0; g < kNumMotorGroups; ++g) {
    if (name == to_string(static_cast<MotorGroup>(g))) return static_cast<MotorGroup>(g);
  }
  throw ConfigError("unknown motor group " + name);
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

json report_to_json(const Report& report) {
  return std::visit(
      [](const auto& r) -> json {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, AccuracyReport>) {
          json joints = json::array();
          for (const auto& j : r.joints) {
            joints.push_back({{"joint", to_string(j.joint)},
                              {"mean_abs_error", j.mean_abs_error},
                              {"mean_pct_error", j.mean_pct_error},
                              {"n", j.n},
                              {"range", j.range}});
          }
          return {{"kind", "accuracy"},     {"seed", r.seed},
                  {"config_hash", r.config_hash}, {"n", r.n},
                  {"hold", r.hold},         {"joints", joints},
                  {"overall", {{"mean_abs_error", r.overall_abs_error}, {"mean_pct_error", r.overall_pct_error}}}};
        } else if constexpr (std::is_same_v<T, CouplingReport>) {
          return {{"kind", "coupling"},
                  {"seed", r.seed},
                  {"config_hash", r.config_hash},
                  {"motor", r.motor},
                  {"trials", r.trials},
                  {"rigid", stats_json(r.rigid)},
                  {"free", stats_json(r.free)},
                  {"coupled_more_repeatable", r.coupled_more_repeatable}};
        } else {
          json log = json::array();
          for (const auto& s : r.log) log.push_back({s.time, s.group_c[0], s.group_c[1], s.group_c[2]});
          json cycles = json::array();
          for (const auto& s : r.cycle_means) cycles.push_back({s.time, s.group_c[0], s.group_c[1], s.group_c[2]});
          json summary = json::array();
          for (const auto& s : r.summary) {
            summary.push_back({{"group", to_string(s.group)}, {"peak", s.peak}, {"steady", s.steady}, {"delta", s.delta}});
          }
          return {{"kind", "thermal"}, {"config_hash", r.config_hash}, {"hours", r.hours},
                  {"dt", r.dt},        {"summary", summary},           {"log", log},
                  {"cycle_means", cycles}};
        }
      },
      report);
}

Report report_from_json(const json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "accuracy") {
      AccuracyReport r;
      r.seed = j.at("seed").get<std::uint64_t>();
      r.config_hash = j.at("config_hash").get<std::string>();
      r.n = j.at("n").get<int>();
      r.hold = j.at("hold").get<double>();
      for (const auto& jj : j.at("joints")) {
        r.joints.push_back({joint_from_string(jj.at("joint").get<std::string>()), jj.at("mean_abs_error").get<double>(),
                            jj.at("mean_pct_error").get<double>(), jj.at("n").get<int>(), jj.at("range").get<double>()});
      }
      r.overall_abs_error = j.at("overall").at("mean_abs_error").get<double>();
      r.overall_pct_error = j.at("overall").at("mean_pct_error").get<double>();
      return r;
    }
    if (kind == "coupling") {
      CouplingReport r;
      r.seed = j.at("seed").get<std::uint64_t>();
      r.config_hash = j.at("config_hash").get<std::string>();
      r.motor = j.at("motor").get<int>();
      r.trials = j.at("trials").get<int>();
      r.rigid = stats_from(j.at("rigid"));
      r.free = stats_from(j.at("free"));
      r.coupled_more_repeatable = j.at("coupled_more_repeatable").get<bool>();
      return r;
    }
    if (kind == "thermal") {
      ThermalReport r;
      r.config_hash = j.at("config_hash").get<std::string>();
      r.hours = j.at("hours").get<double>();
      r.dt = j.at("dt").get<double>();
      auto rows = [](const json& a) {
        std::vector<ThermalSample> out;
        for (const auto& row : a) {
          out.push_back({row.at(0).get<double>(),
                         {row.at(1).get<double>(), row.at(2).get<double>(), row.at(3).get<double>()}});
        }
        return out;
      };
      r.log = rows(j.at("log"));
      r.cycle_means = rows(j.at("cycle_means"));
      for (const auto& s : j.at("summary")) {
        const MotorGroup g = group_from(s.at("group").get<std::string>());
        r.summary[static_cast<int>(g)] = {g, s.at("peak").get<double>(), s.at("steady").get<double>(),
                                          s.at("delta").get<double>()};
      }
      return r;
    }
    throw ConfigError("unknown report kind " + kind);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed report: ") + e.what());
  }
}

std::string export_report(const Report& report, ReportFormat format) {
  if (format == ReportFormat::Json) return report_to_json(report).dump(2) + "\n";

  std::ostringstream os;
  std::visit(
      [&](const auto& r) {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, AccuracyReport>) {
          os << "# accuracy seed=" << r.seed << " config_hash=" << r.config_hash << " n=" << r.n
             << " hold=" << num(r.hold) << "\n";
          os << "joint,mean_abs_error_deg,mean_pct_error,n,range_deg\n";
          for (const auto& j : r.joints) {
            os << to_string(j.joint) << ',' << num(j.mean_abs_error) << ',' << num(j.mean_pct_error) << ',' << j.n
               << ',' << num(j.range) << '\n';
          }
          os << "overall," << num(r.overall_abs_error) << ',' << num(r.overall_pct_error) << ",,\n";
        } else if constexpr (std::is_same_v<T, CouplingReport>) {
          os << "# coupling seed=" << r.seed << " config_hash=" << r.config_hash << " motor=" << r.motor
             << " trials=" << r.trials << " rigid_mean_std=" << num(r.rigid.mean_std)
             << " free_mean_std=" << num(r.free.mean_std) << " rigid_loop_area=" << num(r.rigid.loop_area)
             << " free_loop_area=" << num(r.free.loop_area)
             << " coupled_more_repeatable=" << (r.coupled_more_repeatable ? "true" : "false") << "\n";
          os << "mode,direction,cmd_ticks,mean_deg,std_deg\n";
          auto rows = [&](const char* mode, const SweepStats& s) {
            for (std::size_t k = 0; k < s.cmd.size(); ++k) {
              os << mode << ",forward," << num(s.cmd[k]) << ',' << num(s.forward_mean[k]) << ','
                 << num(s.forward_std[k]) << '\n';
            }
            for (std::size_t k = 0; k < s.cmd.size(); ++k) {
              os << mode << ",reverse," << num(s.cmd[k]) << ',' << num(s.reverse_mean[k]) << ','
                 << num(s.reverse_std[k]) << '\n';
            }
          };
          rows("rigid_coupled", r.rigid);
          rows("free_uncoupled", r.free);
        } else {
          os << "# thermal config_hash=" << r.config_hash << " hours=" << num(r.hours) << " dt=" << num(r.dt) << "\n";
          for (const auto& s : r.summary) {
            os << "# " << to_string(s.group) << " peak=" << num(s.peak) << " steady=" << num(s.steady)
               << " delta=" << num(s.delta) << "\n";
          }
          os << "time_s,fingers_c,thumb_c,wrist_c\n";
          for (const auto& s : r.log) {
            os << num(s.time) << ',' << num(s.group_c[0]) << ',' << num(s.group_c[1]) << ',' << num(s.group_c[2])
               << '\n';
          }
        }
      },
      report);
  return os.str();
}

void export_report(const Report& report, ReportFormat format, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write report to " + path);
  out << export_report(report, format);
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace handctl
