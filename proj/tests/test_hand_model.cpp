#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "handctl/errors.hpp"
#include "handctl/hand_model.hpp"

using namespace handctl;
using namespace handctl::joints;

namespace {

JointState random_state(const HandModel& model, std::mt19937_64& rng) {
  JointState s;
  for (int i = 0; i < kNumJoints; ++i) {
    std::uniform_real_distribution<double> u(model.limits[i].theta_min, model.limits[i].theta_max);
    s.angles[i] = u(rng);
  }
  return s;
}

// Rotation about y by hand, written out element by element.
Eigen::Matrix3d oracle_rot_y(double deg) {
  const double a = deg * M_PI / 180.0, c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d m;
  m << c, 0, s, 0, 1, 0, -s, 0, c;
  return m;
}

Eigen::Matrix3d oracle_rot_z(double deg) {
  const double a = deg * M_PI / 180.0, c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d m;
  m << c, -s, 0, s, c, 0, 0, 0, 1;
  return m;
}

Eigen::Matrix3d oracle_product(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  Eigen::Matrix3d out = Eigen::Matrix3d::Zero();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) out(i, j) += a(i, k) * b(k, j);
  return out;
}

}  // namespace

TEST(JointId, IndexRoundTripAndNames) {
  std::set<std::string> names;
  for (int i = 0; i < kNumJoints; ++i) {
    const JointId id = JointId::from_index(i);
    EXPECT_EQ(id.index(), i);
    EXPECT_EQ(joint_from_string(to_string(id)), id);
    names.insert(to_string(id));
  }
  EXPECT_EQ(names.size(), static_cast<std::size_t>(kNumJoints));
  EXPECT_EQ(to_string(kIndexPip), "index_pip");
  EXPECT_EQ(to_string(kWristFe), "wrist_fe");
  EXPECT_THROW(JointId::from_index(20), ValidationError);
  EXPECT_THROW((JointId{Finger::Middle, JointKind::Abduction}.index()), ValidationError);
  EXPECT_THROW(joint_from_string("index_knuckle"), ValidationError);
}

TEST(DefaultModel, NominalLimits) {
  const HandModel m = build_default_model();
  EXPECT_EQ(m.limits_of(kIndexDip).theta_min, 0.0);
  EXPECT_EQ(m.limits_of(kIndexDip).theta_max, 120.0);
  EXPECT_EQ(m.limits_of(kWristFe).theta_min, -30.0);
  EXPECT_EQ(m.limits_of(kWristFe).theta_max, 45.0);
  EXPECT_EQ(m.limits_of(kWristRud).theta_min, -35.0);
  EXPECT_EQ(m.limits_of(kWristRud).theta_max, 35.0);
  EXPECT_EQ(m.limits_of(kIndexMcp).theta_max, 140.0);
  EXPECT_EQ(m.limits_of(kThumbCmc).theta_max, 170.0);
  EXPECT_EQ(m.limits_of(kThumbMcp).theta_max, 90.0);
  EXPECT_EQ(m.limits_of(kThumbIp).theta_max, 120.0);
  EXPECT_EQ(m.limits_of(kIndexAbd).theta_max, 20.0);
  EXPECT_EQ(m.limits_of(kRingAbd).theta_max, 23.0);
  EXPECT_EQ(m.limits_of(kPinkyAbd).theta_max, 45.0);
}

TEST(DefaultModel, TwentyJointsSixteenMotors) {
  const HandModel m = build_default_model();
  std::set<int> motors(m.actuation_map.begin(), m.actuation_map.end());
  EXPECT_EQ(motors.size(), 16u);
  EXPECT_EQ(m.motor_of(kIndexPip), m.motor_of(kIndexDip));
  EXPECT_EQ(m.driving_joint(m.motor_of(kIndexDip)), kIndexPip);
  EXPECT_NO_THROW(m.validate());
}

TEST(DefaultModel, ValidateRejectsBrokenModels) {
  HandModel m = build_default_model();
  m.digits[1].links_mm[0] = 0.0;
  EXPECT_THROW(m.validate(), ConfigError);

  m = build_default_model();
  m.limits[kIndexPip.index()] = {50.0, 10.0};
  EXPECT_THROW(m.validate(), ConfigError);

  m = build_default_model();
  m.actuation_map[kRingMcp.index()] = m.motor_of(kIndexMcp);
  EXPECT_THROW(m.validate(), ConfigError);
}

TEST(ClampToLimits, Examples) {
  const HandModel m = build_default_model();
  JointState s;
  s[kIndexDip] = 150.0;
  s[kWristFe] = -40.0;
  const JointState c = clamp_to_limits(m, s);
  EXPECT_EQ(c[kIndexDip], 120.0);
  EXPECT_EQ(c[kWristFe], -30.0);
  EXPECT_EQ(clamp_to_limits(m, JointState::Zero()), JointState::Zero());
  EXPECT_TRUE(is_limit_valid(m, c));
  EXPECT_FALSE(is_limit_valid(m, s));
}

TEST(ClampToLimits, IdempotentOnRandomStates) {
  const HandModel m = build_default_model();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> wide(0.0, 200.0);
  for (int t = 0; t < 500; ++t) {
    JointState s;
    for (int i = 0; i < kNumJoints; ++i) s.angles[i] = wide(rng);
    const JointState once = clamp_to_limits(m, s);
    EXPECT_EQ(clamp_to_limits(m, once), once);
    EXPECT_TRUE(is_limit_valid(m, once));
  }
}

TEST(ClampToLimits, RejectsNonFinite) {
  const HandModel m = build_default_model();
  JointState s;
  s[kIndexMcp] = std::nan("");
  EXPECT_THROW(clamp_to_limits(m, s), ValidationError);
}

TEST(Coupling, RigidExamples) {
  const HandModel m = build_default_model();
  JointState s;
  s[kIndexPip] = 60.0;
  s[kIndexDip] = 10.0;
  EXPECT_EQ(apply_coupling(m, s, CouplingMode::Rigid)[kIndexDip], 60.0);
  EXPECT_EQ(apply_coupling(m, s, CouplingMode::Free), s);
  EXPECT_EQ(apply_coupling(m, JointState::Zero(), CouplingMode::Rigid), JointState::Zero());

  JointState full;
  full[kIndexPip] = 120.0;
  EXPECT_EQ(apply_coupling(m, full, CouplingMode::Rigid)[kIndexDip], 120.0);
}

TEST(Coupling, RigidIdempotentAndTouchesOnlyDips) {
  const HandModel m = build_default_model();
  std::mt19937_64 rng(5);
  for (int t = 0; t < 200; ++t) {
    const JointState s = random_state(m, rng);
    const JointState c = apply_coupling(m, s, CouplingMode::Rigid);
    EXPECT_EQ(apply_coupling(m, c, CouplingMode::Rigid), c);
    for (const JointId j : all_joints()) {
      if (j.kind != JointKind::DIP) EXPECT_EQ(c[j], s[j]) << to_string(j);
    }
  }
}

TEST(WristTransform, ZeroIsIdentity) {
  const Eigen::Vector3d pivot(-10, 0, 0);
  const RigidTransformd t = wrist_transform(0.0, 0.0, Vec3<double>(pivot));
  EXPECT_TRUE(t.rotation.isApprox(Eigen::Matrix3d::Identity(), 0.0));
  EXPECT_EQ(t.translation.norm(), 0.0);
}

TEST(WristTransform, PivotIsFixed) {
  const Eigen::Vector3d pivot(-10, 3, -2);
  const RigidTransformd t = wrist_transform(45.0, 0.0, Vec3<double>(pivot));
  EXPECT_LT((t * pivot - pivot).norm(), 1e-9);
}

TEST(WristTransform, MatchesMatrixProductOracle) {
  const RigidTransformd t = wrist_transform(30.0, 20.0, Vec3<double>(-10, 0, 0));
  const Eigen::Matrix3d expect = oracle_product(oracle_rot_y(30.0), oracle_rot_z(20.0));
  EXPECT_LT((t.rotation - expect).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_TRUE(t.is_valid());
}

TEST(WristTransform, WorksInSinglePrecision) {
  const RigidTransform<float> t = wrist_transform(30.0f, -20.0f, Vec3<float>(-10.f, 0.f, 0.f));
  EXPECT_TRUE(t.is_valid(1e-5f));
}

TEST(ForwardKinematics, StraightFingersReachFullLength) {
  const HandModel m = build_default_model();
  const KeypointSet kp = forward_kinematics(m, JointState::Zero());
  for (int d = 1; d < kNumDigits; ++d) {
    const auto& g = m.digits[d];
    const double len = g.links_mm[0] + g.links_mm[1] + g.links_mm[2];
    const Eigen::Vector3d axis = rot_z(g.yaw_deg) * rot_y(g.pitch_deg) * Eigen::Vector3d::UnitX();
    const Eigen::Vector3d tip = kp.col(keypoint_index(d, 3));
    EXPECT_NEAR((tip - g.base_mm).norm(), len, 1e-9);
    EXPECT_LT((tip - (g.base_mm + len * axis)).norm(), 1e-9);
  }
}

TEST(ForwardKinematics, IndexMcpNinetyMatchesPlanarChain) {
  const HandModel m = build_default_model();
  JointState s;
  s[kIndexMcp] = 90.0;
  const KeypointSet kp = forward_kinematics(m, s);
  const auto& g = m.digits[1];
  // Flexion plane is x-z with z dorsal: angle theta sends the phalanx to (cos, 0, -sin).
  double x = g.base_mm.x(), z = g.base_mm.z(), phi = 0.0;
  const double angles[3] = {90.0, 0.0, 0.0};
  for (int k = 0; k < 3; ++k) {
    phi += angles[k] * M_PI / 180.0;
    x += g.links_mm[k] * std::cos(phi);
    z -= g.links_mm[k] * std::sin(phi);
    const Eigen::Vector3d p = kp.col(keypoint_index(1, k + 1));
    EXPECT_NEAR(p.x(), x, 1e-9);
    EXPECT_NEAR(p.y(), g.base_mm.y(), 1e-9);
    EXPECT_NEAR(p.z(), z, 1e-9);
  }
}

TEST(ForwardKinematics, WristMotionKeepsPalmOriginDistanceToPivot) {
  const HandModel m = build_default_model();
  const double r0 = (forward_kinematics(m, JointState::Zero()).col(0) - m.wrist_pivot_mm).norm();
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> a(-30, 45), b(-35, 35);
  for (int t = 0; t < 200; ++t) {
    JointState s;
    s[kWristFe] = a(rng);
    s[kWristRud] = b(rng);
    EXPECT_NEAR((forward_kinematics(m, s).col(0) - m.wrist_pivot_mm).norm(), r0, 1e-9);
  }
}

TEST(ForwardKinematics, LipschitzContinuity) {
  const HandModel m = build_default_model();
  std::mt19937_64 rng(11);
  std::normal_distribution<double> unit(0.0, 1.0);
  // Longest lever from any joint is well under 300 mm, so 300 mm/rad bounds the gain.
  const double bound = 300.0 * M_PI / 180.0;
  for (int t = 0; t < 200; ++t) {
    const JointState s = random_state(m, rng);
    JointState d;
    for (int i = 0; i < kNumJoints; ++i) d.angles[i] = 1e-3 * unit(rng);
    JointState sd;
    sd.angles = s.angles + d.angles;
    const double moved = (forward_kinematics(m, sd) - forward_kinematics(m, s)).colwise().norm().maxCoeff();
    EXPECT_LE(moved, bound * d.angles.lpNorm<1>() + 1e-9);
  }
}

TEST(LinkVectors, StraightFingerIsCollinearAndUnit) {
  const HandModel m = build_default_model();
  const LinkVectors v = link_vectors(m, JointState::Zero());
  for (int d = 0; d < kNumDigits; ++d) {
    EXPECT_LT((v.col(3 * d) - v.col(3 * d + 1)).norm(), 1e-12);
    EXPECT_LT((v.col(3 * d) - v.col(3 * d + 2)).norm(), 1e-12);
  }
  for (int i = 0; i < kNumLinks; ++i) EXPECT_NEAR(v.col(i).norm(), 1.0, 1e-9);
}

TEST(LinkVectors, UnitNormsOnRandomStates) {
  const HandModel m = build_default_model();
  std::mt19937_64 rng(13);
  for (int t = 0; t < 100; ++t) {
    const KeypointSet kp = forward_kinematics(m, random_state(m, rng));
    const LinkVectors v = link_vectors_from_keypoints(kp);
    for (int i = 0; i < kNumLinks; ++i) EXPECT_NEAR(v.col(i).norm(), 1.0, 1e-9);
    EXPECT_EQ(link_vectors_from_keypoints(kp), v);
  }
}

TEST(LinkVectors, McpNinetyIsPerpendicularToPalm) {
  const HandModel m = build_default_model();
  JointState s;
  s[kIndexMcp] = 90.0;
  const LinkVectors v = link_vectors(m, s);
  const Eigen::Vector3d palm_axis = link_vectors(m, JointState::Zero()).col(3);
  EXPECT_LT(std::abs(v.col(3).dot(palm_axis)), 1e-6);
}
