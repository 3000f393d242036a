#include <csignal>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "handctl/calibration.hpp"
#include "handctl/config_io.hpp"
#include "handctl/encoder.hpp"
#include "handctl/errors.hpp"
#include "handctl/experiments.hpp"
#include "handctl/retarget.hpp"
#include "handctl/teleop.hpp"

using namespace handctl;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

HandModel model_from(const std::string& path) { return path.empty() ? build_default_model() : load_hand_model(path); }

/// A plant argument is either a preset name or a config file.
PlantConfig plant_from(const std::string& spec, const HandModel& model) {
  if (spec == "ideal") return PlantConfig::Ideal(model);
  if (spec == "default") return PlantConfig::Default(model);
  if (spec == "fitted-regime") return PlantConfig::FittedRegime(model);
  return load_plant_config(spec);
}

ReportFormat format_from(const std::string& name) {
  if (name == "csv") return ReportFormat::Csv;
  if (name == "json") return ReportFormat::Json;
  throw ValidationError("unknown format '" + name + "' (csv or json)");
}

CalibrationSet calibrations_from(const std::string& path, Plant& plant) {
  if (!path.empty()) return load_calibration(path).motors;
  return auto_calibrate_all(plant, procedure_for(plant.config()));
}

void emit_report(const Report& report, const std::string& format, const std::string& out) {
  const ReportFormat fmt = format_from(format);
  if (out.empty() || out == "-") {
    std::cout << export_report(report, fmt);
  } else {
    export_report(report, fmt, out);
    std::cerr << "wrote " << out << "\n";
  }
}

void print_accuracy(const AccuracyReport& r) {
  std::cerr << std::fixed << std::setprecision(3);
  std::cerr << "joint               mean_err_deg  mean_err_pct  range_deg\n";
  for (const auto& j : r.joints) {
    std::cerr << std::left << std::setw(20) << to_string(j.joint) << std::right << std::setw(12) << j.mean_abs_error
              << std::setw(14) << j.mean_pct_error << std::setw(11) << j.range << "\n";
  }
  std::cerr << std::left << std::setw(20) << "overall" << std::right << std::setw(12) << r.overall_abs_error
            << std::setw(14) << r.overall_pct_error << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"handctl: simulated tendon-driven hand control stack"};
  app.require_subcommand(1);

  std::string model_path;
  app.add_option("--model", model_path, "Hand model JSON (default: built-in geometry)");

  // defaults
  auto* defaults = app.add_subcommand("defaults", "Write the built-in model and plant presets as JSON");
  std::string defaults_dir = "config";
  defaults->add_option("--out-dir", defaults_dir, "Destination directory");

  // calibrate
  auto* calibrate = app.add_subcommand("calibrate", "Discover per-motor limits on the simulated plant");
  std::string cal_motor = "all", cal_out = "calibration.json", cal_plant = "default";
  double cal_step = 5.0;
  int cal_debounce = 3;
  calibrate->add_option("--motor", cal_motor, "Motor index or 'all'");
  calibrate->add_option("--plant", cal_plant, "Plant preset (ideal, default, fitted-regime) or config file");
  calibrate->add_option("--out", cal_out, "Calibration file to write");
  calibrate->add_option("--step", cal_step, "Probe step, ticks");
  calibrate->add_option("--debounce", cal_debounce, "Consecutive tensioned samples");

  // eval
  auto* eval = app.add_subcommand("eval", "Run an evaluation experiment");
  eval->require_subcommand(1);
  std::string ev_plant = "default", ev_calib, ev_format = "json", ev_out;

  auto* acc = eval->add_subcommand("accuracy", "Commanded vs encoder-measured joint angles");
  int acc_n = 20;
  double acc_hold = 1.5;
  std::uint64_t acc_seed = 0;
  acc->add_option("--n", acc_n, "Targets per joint");
  acc->add_option("--hold", acc_hold, "Hold time per target, seconds");
  acc->add_option("--seed", acc_seed, "RNG seed");
  acc->add_option("--plant", ev_plant, "Plant preset or config file");
  acc->add_option("--calib", ev_calib, "Calibration file (default: auto-calibrate the plant)");
  acc->add_option("--format", ev_format, "csv or json");
  acc->add_option("--out", ev_out, "Report path (default: stdout)");

  auto* cpl = eval->add_subcommand("coupling", "Rigid vs free DIP/PIP repeatability sweeps");
  int cpl_trials = 10;
  std::uint64_t cpl_seed = 0;
  double cpl_jitter = 0.05, cpl_sigma = 0.2, cpl_band = 2.0;
  cpl->add_option("--trials", cpl_trials, "Sweep cycles per mode");
  cpl->add_option("--seed", cpl_seed, "RNG seed");
  cpl->add_option("--jitter", cpl_jitter, "Uncoupled DIP/PIP ratio jitter (fraction)");
  cpl->add_option("--sigma", cpl_sigma, "Measurement noise, degrees");
  cpl->add_option("--dip-band", cpl_band, "Uncoupled DIP play band, degrees");
  cpl->add_option("--plant", ev_plant, "Plant preset or config file");
  cpl->add_option("--format", ev_format, "csv or json");
  cpl->add_option("--out", ev_out, "Report path (default: stdout)");

  auto* thermal = eval->add_subcommand("thermal", "Endurance schedule with per-group temperatures");
  double th_hours = 5.0, th_dt = 0.1;
  thermal->add_option("--hours", th_hours, "Simulated duration");
  thermal->add_option("--dt", th_dt, "Integration step, seconds");
  thermal->add_option("--plant", ev_plant, "Plant preset or config file");
  thermal->add_option("--format", ev_format, "csv or json");
  thermal->add_option("--out", ev_out, "Report path (default: stdout)");

  auto* exp = eval->add_subcommand("export", "Convert a saved JSON report");
  std::string exp_in;
  exp->add_option("--in", exp_in, "JSON report written by another eval command")->required();
  exp->add_option("--format", ev_format, "csv or json")->required();
  exp->add_option("--out", ev_out, "Output path")->required();

  // serve
  auto* srv = app.add_subcommand("serve", "Run the live teleoperation service");
  double srv_rate = 50.0, srv_seconds = 0.0;
  int srv_port = 7600;
  std::uint64_t srv_seed = 0;
  std::string srv_plant = "default", srv_calib, srv_input_log, srv_demo = "demonstrations.ndjson", srv_msg_log;
  srv->add_option("--rate", srv_rate, "Control rate, Hz");
  srv->add_option("--port", srv_port, "TCP port")->check(CLI::Range(1, 65535));
  srv->add_option("--plant", srv_plant, "Plant preset or config file");
  srv->add_option("--calib", srv_calib, "Calibration file (default: auto-calibrate the plant)");
  srv->add_option("--seed", srv_seed, "Noise-injection seed");
  srv->add_option("--seconds", srv_seconds, "Stop after this long (0: until interrupted)");
  srv->add_option("--input-log", srv_input_log, "Record inbound messages for replay");
  srv->add_option("--messages-log", srv_msg_log, "Record outbound messages");
  srv->add_option("--demo", srv_demo, "Demonstration file (appended)");

  // replay
  auto* rep = app.add_subcommand("replay", "Re-run a logged teleop session");
  std::string rep_in, rep_plant = "default", rep_calib, rep_msgs = "-", rep_demo = "replay_demo.ndjson";
  rep->add_option("--input-log", rep_in, "Input log written by serve")->required();
  rep->add_option("--plant", rep_plant, "Plant preset or config file");
  rep->add_option("--calib", rep_calib, "Calibration file (default: auto-calibrate the plant)");
  rep->add_option("--messages-out", rep_msgs, "Outbound message log ('-' for stdout)");
  rep->add_option("--demo-out", rep_demo, "Demonstration output");

  // retarget
  auto* rt = app.add_subcommand("retarget", "Retarget a keypoint stream offline");
  std::string rt_in, rt_out = "-";
  double rt_lambda = 1.0;
  rt->add_option("--in", rt_in, "Keypoint stream (one JSON record per line, meters)")->required();
  rt->add_option("--out", rt_out, "Joint angle stream ('-' for stdout)");
  rt->add_option("--lambda", rt_lambda, "Temporal smoothing factor in [0, 1]");

  // encoder
  auto* enc = app.add_subcommand("encoder", "Decode a captured encoder byte stream to CSV");
  std::string enc_in, enc_out = "-";
  enc->add_option("--in", enc_in, "Raw byte capture")->required();
  enc->add_option("--out", enc_out, "CSV output ('-' for stdout)");

  // sweep
  auto* sw = app.add_subcommand("sweep", "Forward/reverse sweep of one motor");
  int sw_motor = 5, sw_cycles = 10;
  std::string sw_plant = "default", sw_coupling = "rigid", sw_out = "-";
  sw->add_option("--motor", sw_motor, "Motor index")->check(CLI::Range(0, kNumMotors - 1));
  sw->add_option("--cycles", sw_cycles, "Sweep cycles");
  sw->add_option("--plant", sw_plant, "Plant preset or config file");
  sw->add_option("--coupling", sw_coupling, "rigid or free")->check(CLI::IsMember({"rigid", "free"}));
  sw->add_option("--out", sw_out, "CSV output ('-' for stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    const HandModel model = model_from(model_path);

    if (*defaults) {
      std::filesystem::create_directories(defaults_dir);
      const std::filesystem::path dir(defaults_dir);
      write_json_file((dir / "hand_model.json").string(), to_json(model));
      write_json_file((dir / "plant_ideal.json").string(), to_json(PlantConfig::Ideal(model)));
      write_json_file((dir / "plant_default.json").string(), to_json(PlantConfig::Default(model)));
      write_json_file((dir / "plant_fitted_regime.json").string(), to_json(PlantConfig::FittedRegime(model)));
      std::cerr << "wrote defaults to " << defaults_dir << "\n";
    } else if (*calibrate) {
      Plant plant(model, plant_from(cal_plant, model));
      CalibrationProcedureConfig proc = procedure_for(plant.config());
      proc.step = cal_step;
      proc.debounce = cal_debounce;
      CalibrationFile file;
      if (std::filesystem::exists(cal_out)) file = load_calibration(cal_out);
      if (cal_motor == "all") {
        file.motors = auto_calibrate_all(plant, proc);
      } else {
        std::size_t used = 0;
        const int m = std::stoi(cal_motor, &used);
        if (used != cal_motor.size() || m < 0 || m >= kNumMotors) {
          throw ValidationError("--motor must be 0.." + std::to_string(kNumMotors - 1) + " or 'all'");
        }
        file.motors[m] = auto_calibrate_motor(plant, m, proc);
      }
      for (int m = 0; m < kNumMotors; ++m) {
        if (!file.motors[m]) continue;
        const auto& r = *file.motors[m];
        std::cerr << "motor " << std::setw(2) << m << "  p_min " << r.p_min << "  p_max " << r.p_max << "  theta "
                  << r.theta_min << ".." << r.theta_max << "\n";
      }
      save_calibration(cal_out, file);
    } else if (*eval) {
      if (*acc) {
        Plant plant(model, plant_from(ev_plant, model));
        const CalibrationSet cals = calibrations_from(ev_calib, plant);
        AccuracyOptions opts;
        opts.n = acc_n;
        opts.hold = acc_hold;
        opts.seed = acc_seed;
        const AccuracyReport report = run_accuracy_experiment(plant, cals, opts);
        print_accuracy(report);
        emit_report(report, ev_format, ev_out);
      } else if (*cpl) {
        PlantConfig cfg = plant_from(ev_plant, model);
        cfg.uncoupled_ratio_jitter = cpl_jitter;
        cfg.noise_sigma = cpl_sigma;
        cfg.uncoupled_dip_band = cpl_band;
        CouplingOptions opts;
        opts.trials = cpl_trials;
        opts.seed = cpl_seed;
        const CouplingReport report = run_coupling_comparison(model, cfg, opts);
        std::cerr << "mean per-command std: rigid " << report.rigid.mean_std << " deg, free " << report.free.mean_std
                  << " deg; coupled more repeatable: " << (report.coupled_more_repeatable ? "yes" : "no") << "\n";
        emit_report(report, ev_format, ev_out);
      } else if (*thermal) {
        Plant plant(model, plant_from(ev_plant, model));
        ThermalOptions opts;
        opts.hours = th_hours;
        opts.dt = th_dt;
        const ThermalReport report = run_thermal_endurance(plant, opts);
        std::cerr << std::fixed << std::setprecision(2);
        for (const auto& s : report.summary) {
          std::cerr << std::left << std::setw(8) << to_string(s.group) << " peak " << s.peak << "  steady " << s.steady
                    << "  delta " << s.delta << "\n";
        }
        emit_report(report, ev_format, ev_out);
      } else if (*exp) {
        emit_report(report_from_json(read_json_file(exp_in)), ev_format, ev_out);
      }
    } else if (*srv) {
      Plant cal_plant_sim(model, plant_from(srv_plant, model));
      const CalibrationSet cals = calibrations_from(srv_calib, cal_plant_sim);
      TeleopConfig tc;
      tc.rate_hz = srv_rate;
      tc.seed = srv_seed;
      TeleopSession session(model, cals, plant_from(srv_plant, model), tc);
      ServeOptions so;
      so.port = static_cast<std::uint16_t>(srv_port);
      so.max_seconds = srv_seconds;
      so.input_log_path = srv_input_log;
      so.messages_log_path = srv_msg_log;
      so.demo_path = srv_demo;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "serving on port " << srv_port << " at " << srv_rate << " Hz\n";
      const ServeStats stats = serve(session, so, g_stop);
      std::cerr << "ticks " << stats.ticks << "  overruns " << stats.overruns << "  in " << stats.messages_in
                << "  out " << stats.messages_out << "\n";
    } else if (*rep) {
      std::ifstream in(rep_in);
      if (!in) throw IoError("cannot open " + rep_in);
      const InputLog log = read_input_log(in);
      Plant cal_plant_sim(model, plant_from(rep_plant, model));
      const CalibrationSet cals = calibrations_from(rep_calib, cal_plant_sim);
      std::ofstream demo(rep_demo);
      if (!demo) throw IoError("cannot write " + rep_demo);
      if (rep_msgs == "-") {
        replay_session(model, cals, plant_from(rep_plant, model), {}, log, std::cout, demo);
      } else {
        std::ofstream msgs(rep_msgs);
        if (!msgs) throw IoError("cannot write " + rep_msgs);
        replay_session(model, cals, plant_from(rep_plant, model), {}, log, msgs, demo);
      }
    } else if (*rt) {
      std::ifstream in(rt_in);
      if (!in) throw IoError("cannot open " + rt_in);
      std::ofstream file;
      if (rt_out != "-") {
        file.open(rt_out);
        if (!file) throw IoError("cannot write " + rt_out);
      }
      std::ostream& out = rt_out == "-" ? std::cout : file;
      RetargetConfig rc;
      rc.smoothing_lambda = rt_lambda;
      rc.validate();
      JointState prev = clamp_to_limits(model, JointState::Zero());
      while (auto pose = read_pose_line(in)) {
        const RetargetResult r = solve_retarget(*pose, model, prev, rc);
        prev = clamp_to_limits(model, smooth_step(r.theta, prev, rc.smoothing_lambda));
        nlohmann::json angles = nlohmann::json::object();
        for (const JointId j : all_joints()) angles[to_string(j)] = prev[j];
        out << nlohmann::json{{"t", pose->timestamp}, {"residual", r.residual}, {"joints", angles}}.dump() << '\n';
      }
    } else if (*enc) {
      ReplayFileSource source(enc_in);
      std::ofstream file;
      if (enc_out != "-") {
        file.open(enc_out);
        if (!file) throw IoError("cannot write " + enc_out);
      }
      std::ostream& out = enc_out == "-" ? std::cout : file;
      write_encoder_csv_header(out);
      FrameParser parser;
      std::array<std::uint8_t, 4096> buf{};
      std::size_t n = 0;
      while ((n = source.read(buf)) > 0) {
        for (const auto& f : parser.feed(std::span(buf.data(), n))) write_encoder_csv_row(out, f, raw_to_degrees(f.raw));
      }
      std::cerr << "frames " << parser.frames_ok() << "  corrupt " << parser.corrupt_frames() << "  skipped bytes "
                << parser.bytes_skipped() << "\n";
    } else if (*sw) {
      PlantConfig cfg = plant_from(sw_plant, model);
      cfg.coupling_mode = sw_coupling == "rigid" ? PlantCoupling::RigidCoupled : PlantCoupling::FreeUncoupled;
      Plant plant(model, cfg);
      const SweepTrajectory traj = run_sweep(plant, sw_motor, sw_cycles);
      std::ofstream file;
      if (sw_out != "-") {
        file.open(sw_out);
        if (!file) throw IoError("cannot write " + sw_out);
      }
      std::ostream& out = sw_out == "-" ? std::cout : file;
      out << "trial,direction,cmd_ticks,angle_deg\n" << std::setprecision(17);
      for (const auto& s : traj.samples) {
        out << s.trial << ',' << (s.direction == SweepDirection::Forward ? "forward" : "reverse") << ',' << s.cmd_ticks
            << ',' << s.angle_deg << '\n';
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
