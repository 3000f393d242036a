#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "handctl/calibration.hpp"
#include "handctl/errors.hpp"
#include "handctl/experiments.hpp"

using namespace handctl;
using namespace handctl::joints;

namespace {

const HandModel& model() {
  static const HandModel m = build_default_model();
  return m;
}

std::string line_at(const std::string& text, int k) {
  std::istringstream in(text);
  std::string line;
  for (int i = 0; i <= k; ++i) std::getline(in, line);
  return line;
}

AccuracyReport published_columns(const double (&deg)[7], const double (&pct)[7]) {
  AccuracyReport r;
  const auto joints = AccuracyOptions::default_joints();
  for (int i = 0; i < 7; ++i) r.joints.push_back({joints[i], deg[i], pct[i], 20, 100.0});
  aggregate(r);
  return r;
}

}  // namespace

TEST(Aggregate, ReproducesPublishedOverallAverages) {
  const double deg[7] = {3.76, 7.69, 11.91, 12.77, 7.85, 11.07, 2.76};
  const double pct[7] = {15.96, 9.62, 11.91, 8.51, 7.47, 16.27, 5.01};
  const AccuracyReport r = published_columns(deg, pct);
  // Hundredths sum to 5781 and 7475; exact means are 5781/700 and 7475/700.
  EXPECT_NEAR(r.overall_abs_error, 5781.0 / 700.0, 1e-12);
  EXPECT_NEAR(r.overall_pct_error, 7475.0 / 700.0, 1e-12);
  EXPECT_EQ(std::lround(r.overall_abs_error * 100.0), 826);
  EXPECT_EQ(std::lround(r.overall_pct_error * 100.0), 1068);
  for (const auto& j : r.joints) EXPECT_EQ(j.n, 20);
}

TEST(Aggregate, DefaultJointsAreTheInstrumentedSeven) {
  const auto j = AccuracyOptions::default_joints();
  ASSERT_EQ(j.size(), 7u);
  EXPECT_EQ(j[0], kIndexAbd);
  EXPECT_EQ(j[1], kIndexDip);
  EXPECT_EQ(j[2], kIndexPip);
  EXPECT_EQ(j[3], kIndexMcp);
  EXPECT_EQ(j[4], kThumbCmc);
  EXPECT_EQ(j[5], kThumbMcp);
  EXPECT_EQ(j[6], kThumbIp);
}

TEST(Accuracy, IdealPlantErrorIsQuantizationScale) {
  Plant plant(model(), PlantConfig::Ideal(model()));
  const CalibrationSet cals = plant.config().truth_calibrations();
  const double encoder = 360.0 / kEncoderCounts;
  for (std::uint64_t seed = 0; seed < 16; ++seed) {
    AccuracyOptions opts;
    opts.n = 10;
    opts.seed = seed;
    plant.reset();
    const AccuracyReport r = run_accuracy_experiment(plant, cals, opts);
    ASSERT_EQ(r.joints.size(), 7u);
    for (const auto& j : r.joints) {
      const auto& cal = *cals[model().motor_of(j.joint)];
      const double half_tick_deg = 0.5 * cal.theta_span() / std::abs(cal.p_max - cal.p_min);
      EXPECT_LE(j.mean_abs_error, encoder + half_tick_deg) << to_string(j.joint) << " seed " << seed;
      EXPECT_EQ(j.n, 10);
    }
  }
}

TEST(Accuracy, PercentUsesTheCalibratedRange) {
  Plant plant(model(), PlantConfig::FittedRegime(model()));
  const CalibrationSet cals = plant.config().truth_calibrations();
  AccuracyOptions opts;
  opts.n = 5;
  const AccuracyReport r = run_accuracy_experiment(plant, cals, opts);
  for (const auto& j : r.joints) {
    const auto& cal = *cals[model().motor_of(j.joint)];
    EXPECT_EQ(j.range, cal.theta_span());
    EXPECT_NEAR(j.mean_pct_error, 100.0 * j.mean_abs_error / cal.theta_span(), 1e-9);
    const double nominal = 100.0 * j.mean_abs_error / model().limits_of(j.joint).span();
    if (j.joint == kIndexPip || j.joint == kIndexDip || j.joint == kThumbCmc || j.joint == kThumbMcp ||
        j.joint == kThumbIp) {
      EXPECT_GT(std::abs(j.mean_pct_error - nominal), 0.1 * j.mean_pct_error) << to_string(j.joint);
    }
  }
}

TEST(Accuracy, SeedDeterministicAndSeedSensitive) {
  const PlantConfig cfg = PlantConfig::Default(model());
  AccuracyOptions opts;
  opts.n = 4;
  opts.seed = 3;
  Plant a(model(), cfg), b(model(), cfg);
  const CalibrationSet cals = cfg.truth_calibrations();
  const AccuracyReport ra = run_accuracy_experiment(a, cals, opts);
  const AccuracyReport rb = run_accuracy_experiment(b, cals, opts);
  EXPECT_EQ(ra, rb);
  EXPECT_EQ(export_report(ra, ReportFormat::Csv), export_report(rb, ReportFormat::Csv));
  opts.seed = 4;
  Plant c(model(), cfg);
  EXPECT_NE(run_accuracy_experiment(c, cals, opts).overall_abs_error, ra.overall_abs_error);
  EXPECT_EQ(ra.seed, 3u);
  EXPECT_EQ(ra.config_hash.size(), 16u);
}

TEST(Accuracy, MissingCalibrationIsAConfigError) {
  Plant plant(model(), PlantConfig::Ideal(model()));
  CalibrationSet cals = plant.config().truth_calibrations();
  cals[model().motor_of(kThumbIp)].reset();
  EXPECT_THROW(run_accuracy_experiment(plant, cals), ConfigError);
  AccuracyOptions opts;
  opts.n = 0;
  EXPECT_THROW(run_accuracy_experiment(plant, plant.config().truth_calibrations(), opts), ValidationError);
}

TEST(Coupling, IdealPlantBothModesFlat) {
  CouplingOptions opts;
  opts.trials = 3;
  const CouplingReport r = run_coupling_comparison(model(), PlantConfig::Ideal(model()), opts);
  EXPECT_NEAR(r.rigid.mean_std, 0.0, 1e-9);
  EXPECT_NEAR(r.free.mean_std, 0.0, 1e-9);
  EXPECT_EQ(r.rigid.loop_area, 0.0);
  EXPECT_EQ(r.free.loop_area, 0.0);
  EXPECT_EQ(r.motor, model().motor_of(kIndexPip));
}

TEST(Coupling, RigidIsMoreRepeatableAndDeterministic) {
  PlantConfig base = PlantConfig::Ideal(model());
  base.uncoupled_ratio_jitter = 0.05;
  base.uncoupled_dip_band = 2.0;
  base.noise_sigma = 0.2;
  CouplingOptions opts;
  opts.seed = 9;
  const CouplingReport a = run_coupling_comparison(model(), base, opts);
  EXPECT_TRUE(a.coupled_more_repeatable);
  EXPECT_LT(a.rigid.mean_std, a.free.mean_std);
  EXPECT_EQ(a.trials, 10);
  const CouplingReport b = run_coupling_comparison(model(), base, opts);
  EXPECT_EQ(export_report(a, ReportFormat::Json), export_report(b, ReportFormat::Json));
  EXPECT_EQ(export_report(a, ReportFormat::Csv), export_report(b, ReportFormat::Csv));
}

TEST(Thermal, ZeroPowerLogIsFlatAtAmbient) {
  Plant plant(model(), PlantConfig::Ideal(model()));
  ThermalOptions opts;
  opts.hours = 0.5;
  const ThermalReport r = run_thermal_endurance(plant, opts);
  ASSERT_FALSE(r.log.empty());
  for (const auto& s : r.log) {
    for (double c : s.group_c) EXPECT_EQ(c, 25.0);
  }
  for (const auto& g : r.summary) EXPECT_EQ(g.delta, 0.0);
}

TEST(Thermal, FittedPlantReachesTheTargetsMonotonically) {
  Plant plant(model(), PlantConfig::Default(model()));
  const ThermalReport r = run_thermal_endurance(plant);
  const double targets[] = {30.35, 46.97, 43.80};
  for (int g = 0; g < kNumMotorGroups; ++g) {
    EXPECT_NEAR(r.summary[g].steady, targets[g], 0.5) << g;
    EXPECT_GE(r.summary[g].peak, r.summary[g].steady);
    for (std::size_t i = 1; i < r.cycle_means.size(); ++i) {
      ASSERT_GE(r.cycle_means[i].group_c[g], r.cycle_means[i - 1].group_c[g]) << g << " at " << i;
    }
  }
  EXPECT_EQ(r.log.size(), 301u);
  EXPECT_EQ(r.log.back().time, 5.0 * 3600.0);
}

TEST(Thermal, SteadyStateIndependentOfStepSize) {
  ThermalOptions fine, coarse;
  coarse.dt = 1.0;
  Plant a(model(), PlantConfig::Default(model())), b(model(), PlantConfig::Default(model()));
  const ThermalReport ra = run_thermal_endurance(a, fine);
  const ThermalReport rb = run_thermal_endurance(b, coarse);
  for (int g = 0; g < kNumMotorGroups; ++g) EXPECT_NEAR(ra.summary[g].steady, rb.summary[g].steady, 0.05);
}

TEST(Export, JsonRoundTripsForEveryKind) {
  Plant plant(model(), PlantConfig::Default(model()));
  AccuracyOptions ao;
  ao.n = 2;
  ao.joints = {kIndexMcp, kThumbIp};
  CouplingOptions co;
  co.trials = 2;
  co.sweep.points_per_direction = 5;
  ThermalOptions to;
  to.hours = 0.1;
  const std::vector<Report> reports{run_accuracy_experiment(plant, plant.config().truth_calibrations(), ao),
                                    run_coupling_comparison(model(), PlantConfig::Default(model()), co),
                                    run_thermal_endurance(plant, to)};
  for (const Report& r : reports) {
    const auto j = report_to_json(r);
    EXPECT_EQ(report_to_json(report_from_json(j)), j);
    const std::string json_text = export_report(r, ReportFormat::Json);
    EXPECT_EQ(export_report(report_from_json(nlohmann::json::parse(json_text)), ReportFormat::Json), json_text);
    EXPECT_EQ(export_report(report_from_json(j), ReportFormat::Csv), export_report(r, ReportFormat::Csv));
  }
  EXPECT_THROW(report_from_json({{"kind", "payload"}}), ConfigError);
}

TEST(Export, CsvColumnsAreFixed) {
  AccuracyReport a;
  a.joints.push_back({kIndexMcp, 1.5, 2.5, 3, 60.0});
  aggregate(a);
  a.n = 3;
  a.seed = 2;
  a.config_hash = "00000000000000ff";
  a.hold = 1.5;
  EXPECT_EQ(export_report(a, ReportFormat::Csv),
            "# accuracy seed=2 config_hash=00000000000000ff n=3 hold=1.5\n"
            "joint,mean_abs_error_deg,mean_pct_error,n,range_deg\n"
            "index_mcp,1.5,2.5,3,60\n"
            "overall,1.5,2.5,,\n");

  ThermalReport t;
  EXPECT_EQ(line_at(export_report(t, ReportFormat::Csv), 4), "time_s,fingers_c,thumb_c,wrist_c");
  CouplingReport c;
  EXPECT_EQ(line_at(export_report(c, ReportFormat::Csv), 1), "mode,direction,cmd_ticks,mean_deg,std_deg");
}

TEST(Export, WritesFilesByteIdentically) {
  AccuracyReport a;
  a.joints.push_back({kThumbCmc, 0.25, 0.5, 1, 50.0});
  aggregate(a);
  const auto dir = std::filesystem::temp_directory_path();
  const std::string p1 = (dir / "handctl_report_a.json").string(), p2 = (dir / "handctl_report_b.json").string();
  export_report(a, ReportFormat::Json, p1);
  export_report(a, ReportFormat::Json, p2);
  auto slurp = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  EXPECT_EQ(slurp(p1), slurp(p2));
  EXPECT_EQ(slurp(p1), export_report(a, ReportFormat::Json));
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
  EXPECT_THROW(export_report(a, ReportFormat::Csv, "/nonexistent/dir/r.csv"), IoError);
}
