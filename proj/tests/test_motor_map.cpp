#include <random>

#include <gtest/gtest.h>

#include "handctl/errors.hpp"
#include "handctl/motor_map.hpp"

using namespace handctl;
using namespace handctl::joints;

namespace {

const CalibrationRecord kRecord{1000.0, 3000.0, 0.0, 120.0, 1.0};

CalibrationRecord random_record(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> tick(0.0, 4095.0), ang(-60.0, 60.0), span(1.0, 180.0), c(0.5, 1.5);
  CalibrationRecord r;
  do {
    r.p_min = tick(rng);
    r.p_max = tick(rng);
  } while (std::abs(r.p_max - r.p_min) < 10.0);
  r.theta_min = ang(rng);
  r.theta_max = r.theta_min + span(rng);
  r.c = c(rng);
  return r;
}

CalibrationSet calibrations_for(const HandModel& model) {
  CalibrationSet set;
  for (int m = 0; m < kNumMotors; ++m) {
    const JointLimits& lim = model.limits_of(model.driving_joint(m));
    set[m] = CalibrationRecord{1000.0 + 10 * m, 3000.0 - 20 * m, lim.theta_min, lim.theta_max, 1.0};
  }
  return set;
}

}  // namespace

TEST(JointToMotor, Examples) {
  EXPECT_EQ(joint_to_motor(0.0, kRecord), 1000.0);
  EXPECT_EQ(joint_to_motor(120.0, kRecord), 3000.0);
  EXPECT_EQ(joint_to_motor(60.0, kRecord), 2000.0);
  CalibrationRecord c11 = kRecord;
  c11.c = 1.1;
  EXPECT_NEAR(joint_to_motor(60.0, c11), 2100.0, 1e-9);
}

TEST(JointToMotor, ClampsOutOfRangeAndOverdrive) {
  EXPECT_EQ(joint_to_motor(-50.0, kRecord), 1000.0);
  EXPECT_EQ(joint_to_motor(500.0, kRecord), 3000.0);
  CalibrationRecord hot = kRecord;
  hot.c = 3.0;
  EXPECT_EQ(joint_to_motor(100.0, hot), 3000.0);
}

TEST(JointToMotor, InvalidRecordsThrow) {
  CalibrationRecord r = kRecord;
  r.p_max = r.p_min;
  EXPECT_THROW(joint_to_motor(10.0, r), ConfigError);
  r = kRecord;
  r.theta_max = r.theta_min;
  EXPECT_THROW(joint_to_motor(10.0, r), ConfigError);
  r = kRecord;
  r.c = 0.0;
  EXPECT_THROW(joint_to_motor(10.0, r), ConfigError);
  EXPECT_THROW(joint_to_motor(std::nan(""), kRecord), ValidationError);
}

TEST(MotorToJoint, Examples) {
  EXPECT_EQ(motor_to_joint(1000.0, kRecord), 0.0);
  EXPECT_EQ(motor_to_joint(2000.0, kRecord), 60.0);
  EXPECT_EQ(motor_to_joint(3000.0, kRecord), 120.0);
}

TEST(MotorMap, GeneralizedFormForWristRange) {
  const CalibrationRecord wrist{1500.0, 2600.0, -30.0, 45.0, 1.0};
  EXPECT_EQ(joint_to_motor(-30.0, wrist), 1500.0);
  EXPECT_NEAR(joint_to_motor(0.0, wrist), 1500.0 + 30.0 / 75.0 * 1100.0, 1e-9);
  EXPECT_NEAR(motor_to_joint(joint_to_motor(12.5, wrist), wrist), 12.5, 1e-9);
}

TEST(MotorMap, PropertiesOnRandomRecords) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 1000; ++t) {
    const CalibrationRecord r = random_record(rng);
    std::uniform_real_distribution<double> in(r.theta_min, r.theta_max);
    std::uniform_real_distribution<double> any(r.theta_min - 100.0, r.theta_max + 100.0);
    const double sign = r.p_max > r.p_min ? 1.0 : -1.0;
    double a = in(rng), b = in(rng);
    if (a > b) std::swap(a, b);
    const double pa = joint_to_motor(a, r), pb = joint_to_motor(b, r);
    if (b > a && pa != pb) EXPECT_GT(sign * (pb - pa), 0.0);

    const double p_any = joint_to_motor(any(rng), r);
    EXPECT_GE(p_any, r.tick_lo());
    EXPECT_LE(p_any, r.tick_hi());

    // Exact round trip wherever the forward map is not clamped.
    if (pa > r.tick_lo() && pa < r.tick_hi()) EXPECT_NEAR(motor_to_joint(pa, r), a, 1e-9);
  }
}

TEST(MotorMap, StrictMonotonicityOnAGrid) {
  std::mt19937_64 rng(22);
  for (int t = 0; t < 1000; ++t) {
    CalibrationRecord r = random_record(rng);
    r.c = 1.0;
    const double sign = r.p_max > r.p_min ? 1.0 : -1.0;
    double prev = joint_to_motor(r.theta_min, r);
    for (int k = 1; k <= 16; ++k) {
      const double p = joint_to_motor(r.theta_min + r.theta_span() * k / 16.0, r);
      EXPECT_GT(sign * (p - prev), 0.0);
      prev = p;
    }
  }
}

TEST(StateToMotorVector, ZeroStateSitsAtTensionPoints) {
  const HandModel model = build_default_model();
  const CalibrationSet cals = calibrations_for(model);
  const MotorVector v = state_to_motor_vector(model, clamp_to_limits(model, JointState::Zero()), cals);
  for (int m = 0; m < kNumMotors; ++m) {
    const JointId j = model.driving_joint(m);
    if (model.limits_of(j).theta_min == 0.0) EXPECT_EQ(v[m], cals[m]->p_min) << m;
  }
}

TEST(StateToMotorVector, CoupledCurlAtFullFlexion) {
  const HandModel model = build_default_model();
  const CalibrationSet cals = calibrations_for(model);
  JointState s;
  s[kIndexPip] = 120.0;
  s[kIndexDip] = 120.0;
  EXPECT_EQ(state_to_motor_vector(model, s, cals)[model.motor_of(kIndexPip)], cals[model.motor_of(kIndexPip)]->p_max);
}

TEST(StateToMotorVector, MatchesPerMotorLoop) {
  const HandModel model = build_default_model();
  const CalibrationSet cals = calibrations_for(model);
  std::mt19937_64 rng(23);
  for (int t = 0; t < 200; ++t) {
    JointState s;
    for (int i = 0; i < kNumJoints; ++i) {
      std::uniform_real_distribution<double> u(model.limits[i].theta_min, model.limits[i].theta_max);
      s.angles[i] = u(rng);
    }
    const MotorVector v = state_to_motor_vector(model, s, cals);
    for (int m = 0; m < kNumMotors; ++m) {
      const JointId driver = model.driving_joint(m);
      EXPECT_EQ(v[m], std::llround(joint_to_motor(s[driver], *cals[m])));
    }
  }
}

TEST(StateToMotorVector, FractionalEndpointsStayInRange) {
  const HandModel model = build_default_model();
  CalibrationSet cals = calibrations_for(model);
  cals[0]->p_min = 1000.4;
  cals[0]->p_max = 2999.6;
  const MotorVector v = state_to_motor_vector(model, clamp_to_limits(model, JointState::Zero()), cals);
  EXPECT_GE(v[0], 1000.4);
  JointState full;
  full[kThumbCmc] = 170.0;
  EXPECT_LE(state_to_motor_vector(model, full, cals)[0], 2999.6);
}

TEST(StateToMotorVector, MissingRecordThrows) {
  const HandModel model = build_default_model();
  CalibrationSet cals = calibrations_for(model);
  cals[7].reset();
  EXPECT_THROW(state_to_motor_vector(model, JointState::Zero(), cals), ConfigError);
}

TEST(RoundTicks, TiesAwayFromZero) {
  EXPECT_EQ(round_ticks(1000.5), 1001.0);
  EXPECT_EQ(round_ticks(1000.49), 1000.0);
  EXPECT_EQ(round_ticks(-2.5), -3.0);
}
