// Acceptance gate: one PASS/FAIL line per primary criterion; nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "handctl/calibration.hpp"
#include "handctl/encoder.hpp"
#include "handctl/experiments.hpp"
#include "handctl/retarget.hpp"
#include "handctl/teleop.hpp"

using namespace handctl;
using namespace handctl::joints;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const HandModel& model() {
  static const HandModel m = build_default_model();
  return m;
}

JointState rest() { return clamp_to_limits(model(), JointState::Zero()); }

JointState random_hand_state(std::mt19937_64& rng) {
  JointState th = rest();
  for (int i = 0; i < kNumHandJoints; ++i) {
    std::uniform_real_distribution<double> u(model().limits[i].theta_min, model().limits[i].theta_max);
    th.angles[i] = u(rng);
  }
  return th;
}

Outcome linear_mapping() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const CalibrationRecord r{1000.0, 3000.0, 0.0, 120.0, 1.0};
  o.require(joint_to_motor(0.0, r) == 1000.0 && joint_to_motor(120.0, r) == 3000.0, "endpoints");
  o.require(joint_to_motor(60.0, r) == 2000.0, "midpoint 60 -> 2000");
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> tick(0.0, 4095.0), ang(-60.0, 60.0), span(1.0, 180.0);
  double worst_rt = 0.0;
  int monotone_failures = 0;
  for (int t = 0; t < 1000; ++t) {
    CalibrationRecord c;
    do {
      c.p_min = tick(rng);
      c.p_max = tick(rng);
    } while (std::abs(c.p_max - c.p_min) < 10.0);
    c.theta_min = ang(rng);
    c.theta_max = c.theta_min + span(rng);
    o.require(joint_to_motor(c.theta_min, c) == c.p_min && joint_to_motor(c.theta_max, c) == c.p_max,
              "random endpoints");
    const double sign = c.p_max > c.p_min ? 1.0 : -1.0;
    double prev = joint_to_motor(c.theta_min, c);
    for (int k = 1; k <= 32; ++k) {
      const double th = c.theta_min + c.theta_span() * k / 32.0;
      const double p = joint_to_motor(th, c);
      monotone_failures += !(sign * (p - prev) > 0.0);
      prev = p;
      worst_rt = std::max(worst_rt, std::abs(motor_to_joint(p, c) - th));
    }
  }
  const double dt = seconds_since(t0);
  o.require(worst_rt < 1e-9, "round trip " + fmt("%.3g", worst_rt));
  o.require(monotone_failures == 0, "monotonicity");
  o.require(dt < 1.0, "runtime");
  if (o.ok) o.detail = "round trip err " + fmt("%.2g", worst_rt) + " deg, 1000 records, " + fmt("%.3f", dt) + " s";
  return o;
}

Outcome aggregation_regression() {
  Outcome o;
  // Published columns in hundredths.
  const long deg[7] = {376, 769, 1191, 1277, 785, 1107, 276};
  const long pct[7] = {1596, 962, 1191, 851, 747, 1627, 501};
  long deg_sum = 0, pct_sum = 0;
  for (int i = 0; i < 7; ++i) {
    deg_sum += deg[i];
    pct_sum += pct[i];
  }
  // Round sum/7 to the nearest hundredth in integer arithmetic.
  const long deg_mean = (2 * deg_sum + 7) / 14, pct_mean = (2 * pct_sum + 7) / 14;
  o.require(deg_mean == 826, "rational degree mean " + std::to_string(deg_mean));
  o.require(pct_mean == 1068, "rational percent mean " + std::to_string(pct_mean));

  AccuracyReport r;
  const auto joints = AccuracyOptions::default_joints();
  for (int i = 0; i < 7; ++i) r.joints.push_back({joints[i], deg[i] / 100.0, pct[i] / 100.0, 20, 100.0});
  aggregate(r);
  o.require(std::lround(r.overall_abs_error * 100) == 826, "aggregate() degrees");
  o.require(std::lround(r.overall_pct_error * 100) == 1068, "aggregate() percent");
  if (o.ok) o.detail = "8.26 deg, 10.68 % (" + std::to_string(deg_sum) + "/700, " + std::to_string(pct_sum) + "/700)";
  return o;
}

Outcome accuracy_methodology() {
  Outcome o;
  AccuracyOptions opts;  // 20 samples per joint, 1.5 s hold, seed 0
  Plant ideal(model(), PlantConfig::Ideal(model()));
  const AccuracyReport ri = run_accuracy_experiment(ideal, ideal.config().truth_calibrations(), opts);
  double worst = 0.0;
  for (const auto& j : ri.joints) {
    worst = std::max(worst, j.mean_abs_error);
    o.require(j.n == 20, "n");
  }
  o.require(worst <= 0.05, "ideal worst per-joint mean " + fmt("%.4f", worst));

  Plant fitted(model(), PlantConfig::FittedRegime(model()));
  const CalibrationSet cals = auto_calibrate_all(fitted, procedure_for(fitted.config()));
  const AccuracyReport rp = run_accuracy_experiment(fitted, cals, opts);
  double lo = 1e9, hi = -1e9;
  for (const auto& j : rp.joints) {
    lo = std::min(lo, j.mean_pct_error);
    hi = std::max(hi, j.mean_pct_error);
  }
  o.require(lo >= 5.0 && hi <= 17.0, "fitted-regime pct range [" + fmt("%.2f", lo) + ", " + fmt("%.2f", hi) + "]");
  if (o.ok) {
    o.detail = "ideal worst " + fmt("%.4f", worst) + " deg; fitted-regime preset (fitted) pct in [" + fmt("%.2f", lo) +
               ", " + fmt("%.2f", hi) + "], overall " + fmt("%.2f", rp.overall_abs_error) + " deg / " +
               fmt("%.2f", rp.overall_pct_error) + " %";
  }
  return o;
}

Outcome wrist_pivot() {
  Outcome o;
  const JointLimits fe = model().limits_of(kWristFe), rud = model().limits_of(kWristRud);
  const Eigen::Vector3d pivot = model().wrist_pivot_mm;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> a(fe.theta_min, fe.theta_max), b(rud.theta_min, rud.theta_max);
  double worst_pivot = 0.0, worst_ortho = 0.0;
  for (int t = 0; t < 10000; ++t) {
    const RigidTransformd tr = wrist_transform(a(rng), b(rng), pivot);
    worst_pivot = std::max(worst_pivot, (tr * pivot - pivot).norm());
    worst_ortho = std::max(worst_ortho, (tr.rotation.transpose() * tr.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff());
    worst_ortho = std::max(worst_ortho, std::abs(tr.rotation.determinant() - 1.0));
  }
  o.require(worst_pivot < 1e-9, "pivot drift " + fmt("%.3g", worst_pivot));
  o.require(worst_ortho < 1e-9, "orthonormality " + fmt("%.3g", worst_ortho));
  if (o.ok) o.detail = "10000 samples, pivot drift " + fmt("%.2g", worst_pivot) + " mm, ortho " + fmt("%.2g", worst_ortho);
  return o;
}

Outcome retarget_round_trip() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(5);
  const int trials = 100;
  int ok = 0;
  bool scale_identical = true;
  std::vector<double> residuals;
  for (int t = 0; t < trials; ++t) {
    const JointState truth = random_hand_state(rng);
    HumanHandPose pose = pose_from_keypoints(forward_kinematics(model(), truth));
    const RetargetResult r = solve_retarget(pose, model(), rest());
    ok += (r.theta.angles - truth.angles).head<kNumHandJoints>().cwiseAbs().maxCoeff() < 1.0;
    residuals.push_back(r.residual);
    pose.keypoints *= 2.0;
    const RetargetResult s = solve_retarget(pose, model(), rest());
    scale_identical = scale_identical && s.theta == r.theta && s.residual == r.residual;
  }
  std::sort(residuals.begin(), residuals.end());
  const double median = 0.5 * (residuals[trials / 2 - 1] + residuals[trials / 2]);
  const double dt = seconds_since(t0);
  o.require(ok >= 95, "success " + std::to_string(ok) + "/100");
  o.require(median < 1e-6, "median residual " + fmt("%.3g", median));
  o.require(scale_identical, "x2 scaling changed the result");
  o.require(dt < 60.0, "runtime " + fmt("%.1f", dt));
  if (o.ok) {
    o.detail = std::to_string(ok) + "/100 within 1 deg, median residual " + fmt("%.2g", median) +
               ", x2 scale bit-identical, " + fmt("%.2f", dt) + " s";
  }
  return o;
}

Outcome coupling_comparison() {
  Outcome o;
  PlantConfig base = PlantConfig::Ideal(model());
  base.uncoupled_ratio_jitter = 0.05;
  base.noise_sigma = 0.2;
  base.uncoupled_dip_band = 2.0;
  CouplingOptions opts;
  opts.trials = 10;
  const CouplingReport r = run_coupling_comparison(model(), base, opts);
  o.require(r.rigid.mean_std < r.free.mean_std, "rigid std not below free std");
  const CouplingReport ideal = run_coupling_comparison(model(), PlantConfig::Ideal(model()), opts);
  o.require(ideal.rigid.loop_area == 0.0 && ideal.free.loop_area == 0.0, "ideal loop area nonzero");
  if (o.ok) {
    o.detail = "mean std rigid " + fmt("%.3f", r.rigid.mean_std) + " < free " + fmt("%.3f", r.free.mean_std) +
               " deg; ideal loop areas 0";
  }
  return o;
}

Outcome thermal_endurance() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  Plant plant(model(), PlantConfig::Default(model()));
  const ThermalReport r = run_thermal_endurance(plant);
  const double targets[] = {30.35, 46.97, 43.80};
  std::string steady;
  for (int g = 0; g < kNumMotorGroups; ++g) {
    o.require(std::abs(r.summary[g].steady - targets[g]) <= 0.5, std::string(to_string(r.summary[g].group)) + " steady");
    bool monotone = true;
    for (std::size_t i = 1; i < r.cycle_means.size(); ++i) {
      monotone = monotone && r.cycle_means[i].group_c[g] >= r.cycle_means[i - 1].group_c[g];
    }
    o.require(monotone, std::string(to_string(r.summary[g].group)) + " cycle means not monotone");
    steady += (g ? "/" : "") + fmt("%.2f", r.summary[g].steady);
  }
  if (o.ok) o.detail = "steady " + steady + " C over 5 h simulated in " + fmt("%.2f", seconds_since(t0)) + " s";
  return o;
}

Outcome encoder_codec() {
  Outcome o;
  std::mt19937_64 rng(8);
  bool rt = true;
  for (int t = 0; t < (1 << 20); ++t) {
    const EncoderFrame f{static_cast<std::uint8_t>(rng() % kEncoderChannels),
                         static_cast<std::uint16_t>(rng() % kEncoderCounts), static_cast<std::uint8_t>(rng()), 0};
    const EncoderFrame g = decode_frame(encode_frame(f));
    rt = rt && g.channel == f.channel && g.raw == f.raw && g.seq == f.seq;
  }
  o.require(rt, "frame round trip");

  FrameParser parser;
  std::vector<std::uint8_t> junk(1000000);
  for (auto& b : junk) b = static_cast<std::uint8_t>(rng());
  try {
    parser.feed(junk);
    const FrameBytes good = encode_frame({3, 1234, 9, 0});
    const auto frames = parser.feed(std::vector<std::uint8_t>(good.begin(), good.end()));
    o.require(!frames.empty() && frames.back().raw == 1234, "no resync after fuzz");
  } catch (const std::exception& e) {
    o.require(false, std::string("fuzz threw: ") + e.what());
  }

  o.require(raw_to_degrees(0) == 0.0 && raw_to_degrees(2048) == 180.0 && raw_to_degrees(4095) == 359.912109375,
            "degree examples");
  std::uniform_real_distribution<double> step(-179.0, 179.0);
  double truth = 0.0, unwrapped = 0.0;
  bool unwrap_ok = true;
  for (int t = 0; t < 100000; ++t) {
    truth += step(rng);
    double wrapped = std::fmod(truth, 360.0);
    if (wrapped < 0) wrapped += 360.0;
    unwrapped = unwrap_degrees(unwrapped, wrapped);
    unwrap_ok = unwrap_ok && std::abs(unwrapped - truth) < 1e-6;
  }
  o.require(unwrap_ok, "unwrap");
  if (o.ok) o.detail = "2^20 round trips, 10^6 fuzz bytes (" + std::to_string(parser.frames_ok()) + " chance frames), unwrap ok";
  return o;
}

Outcome calibration_accuracy() {
  Outcome o;
  PlantConfig cfg = PlantConfig::Ideal(model());
  const int m = model().motor_of(kIndexMcp);
  cfg.motors[m].truth.p_min = 1200.0;
  cfg.motors[m].truth.p_max = 3150.0;
  CalibrationProcedureConfig proc;
  proc.start = 1000.0;
  Plant plant(model(), cfg);
  const CalibrationRecord a = auto_calibrate_motor(plant, m, proc);
  const CalibrationRecord b = auto_calibrate_motor(plant, m, proc);
  o.require(std::abs(a.p_min - 1200.0) <= proc.step, "p_min " + fmt("%.1f", a.p_min));
  o.require(std::abs(a.p_max - 3150.0) <= proc.step, "p_max " + fmt("%.1f", a.p_max));
  o.require(a.p_min == b.p_min && a.p_max == b.p_max && a.theta_min == b.theta_min && a.theta_max == b.theta_max,
            "not repeatable");
  if (o.ok) o.detail = "p_min " + fmt("%.0f", a.p_min) + ", p_max " + fmt("%.0f", a.p_max) + " (step 5), repeatable";
  return o;
}

Outcome teleop_replay() {
  Outcome o;
  const PlantConfig plant = PlantConfig::Default(model());
  const CalibrationSet cals = plant.truth_calibrations();
  std::mt19937_64 rng(10);

  InputLog log;
  log.seed = 11;
  log.ticks = 10200;
  std::uint64_t seq = 1;
  auto add = [&](std::uint64_t tick, MessagePayload p) {
    log.entries.push_back({tick, encode_message({seq++, 0.02 * static_cast<double>(tick), std::move(p)})});
  };
  add(0, WristCmdPayload{20.0, -5.0});
  add(0, RecordStartPayload{1.0});
  for (std::uint64_t t = 1; t < 10000; t += 25) {
    add(t, PosePayload{pose_from_keypoints(forward_kinematics(model(), random_hand_state(rng))).keypoints});
  }
  add(10000, RecordStopPayload{});

  std::ostringstream m1, d1, m2, d2;
  replay_session(model(), cals, plant, {}, log, m1, d1);
  replay_session(model(), cals, plant, {}, log, m2, d2);
  o.require(m1.str() == m2.str(), "state log differs");
  o.require(d1.str() == d2.str(), "demonstration log differs");

  std::istringstream in(d1.str());
  std::array<double, kNumJoints> sum{}, sq{};
  long n = 0;
  for (std::string line; std::getline(in, line); ++n) {
    const DemonstrationRecord r = demonstration_from_json(nlohmann::json::parse(line));
    for (int i = 0; i < kNumJoints; ++i) {
      sum[i] += r.noise_applied[i];
      sq[i] += r.noise_applied[i] * r.noise_applied[i];
    }
  }
  o.require(n == 10000, "records " + std::to_string(n));
  double worst_mean = 0.0, worst_sd = 0.0;
  for (int i = 0; i < kNumJoints && n > 1; ++i) {
    const double mean = sum[i] / n;
    const double sd = std::sqrt((sq[i] - n * mean * mean) / (n - 1));
    worst_mean = std::max(worst_mean, std::abs(mean));
    worst_sd = std::max(worst_sd, std::abs(sd - 1.0));
  }
  o.require(worst_mean <= 0.05, "noise mean " + fmt("%.4f", worst_mean));
  o.require(worst_sd <= 0.05, "noise std deviation from 1: " + fmt("%.4f", worst_sd));
  if (o.ok) {
    o.detail = "replay byte-identical (" + std::to_string(m1.str().size()) + " B states, " +
               std::to_string(d1.str().size()) + " B demos); 10^4 ticks, worst |mean| " + fmt("%.4f", worst_mean) +
               ", worst |std-1| " + fmt("%.4f", worst_sd);
  }
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"linear-mapping", linear_mapping},
      {"aggregation-regression", aggregation_regression},
      {"accuracy-methodology", accuracy_methodology},
      {"wrist-pivot", wrist_pivot},
      {"retarget-round-trip", retarget_round_trip},
      {"coupling-comparison", coupling_comparison},
      {"thermal-endurance", thermal_endurance},
      {"encoder-codec", encoder_codec},
      {"calibration", calibration_accuracy},
      {"teleop-replay", teleop_replay},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %s: %s\n", o.ok ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.ok;
  }
  return failed == 0 ? 0 : 1;
}
