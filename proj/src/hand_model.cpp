#include "handctl/hand_model.hpp"

#include <set>

#include "handctl/errors.hpp"

namespace handctl {
namespace {

constexpr std::array<JointId, kNumJoints> kJointTable{
    joints::kThumbCmc, joints::kThumbMcp, joints::kThumbIp,
    joints::kIndexAbd, joints::kIndexMcp, joints::kIndexPip, joints::kIndexDip,
    joints::kMiddleMcp, joints::kMiddlePip, joints::kMiddleDip,
    joints::kRingAbd, joints::kRingMcp, joints::kRingPip, joints::kRingDip,
    joints::kPinkyAbd, joints::kPinkyMcp, joints::kPinkyPip, joints::kPinkyDip,
    joints::kWristFe, joints::kWristRud,
};

std::string_view kind_name(JointKind kind) {
  switch (kind) {
    case JointKind::DIP: return "dip";
    case JointKind::PIP: return "pip";
    case JointKind::MCP: return "mcp";
    case JointKind::Abduction: return "abduction";
    case JointKind::CMC: return "cmc";
    case JointKind::IP: return "ip";
    case JointKind::WristFE: return "fe";
    case JointKind::WristRUD: return "rud";
  }
  return "?";
}

}  // namespace

bool is_valid(JointId id) {
  for (const auto& j : kJointTable) {
    if (j == id) return true;
  }
  return false;
}

int JointId::index() const {
  for (int i = 0; i < kNumJoints; ++i) {
    if (kJointTable[i] == *this) return i;
  }
  throw ValidationError("invalid joint (finger " + std::to_string(static_cast<int>(finger)) + ", kind " +
                        std::to_string(static_cast<int>(kind)) + ")");
}

JointId JointId::from_index(int index) {
  if (index < 0 || index >= kNumJoints) {
    throw ValidationError("joint index out of range: " + std::to_string(index));
  }
  return kJointTable[index];
}

const std::array<JointId, kNumJoints>& all_joints() { return kJointTable; }

std::string_view to_string(Finger finger) {
  switch (finger) {
    case Finger::Thumb: return "thumb";
    case Finger::Index: return "index";
    case Finger::Middle: return "middle";
    case Finger::Ring: return "ring";
    case Finger::Pinky: return "pinky";
    case Finger::Wrist: return "wrist";
  }
  return "?";
}

std::string to_string(JointId id) {
  return std::string(to_string(id.finger)) + "_" + std::string(kind_name(id.kind));
}

JointId joint_from_string(std::string_view name) {
  for (const auto& j : kJointTable) {
    if (to_string(j) == name) return j;
  }
  throw ValidationError("unknown joint name: " + std::string(name));
}

JointId HandModel::driving_joint(int motor) const {
  if (motor < 0 || motor >= kNumMotors) {
    throw ConfigError("motor index out of range: " + std::to_string(motor));
  }
  // Coupled followers never drive; prefer the first non-follower mapped to the motor.
  for (const auto& j : kJointTable) {
    if (motor_of(j) != motor) continue;
    bool follower = false;
    for (const auto& [driver, dip] : coupling) follower = follower || dip == j;
    if (!follower) return j;
  }
  throw ConfigError("motor " + std::to_string(motor) + " drives no joint");
}

void HandModel::validate() const {
  for (int d = 0; d < kNumDigits; ++d) {
    for (double len : digits[d].links_mm) {
      if (!(len > 0.0) || !std::isfinite(len)) {
        throw ConfigError("link lengths must be positive (digit " + std::to_string(d) + ")");
      }
    }
    if (!digits[d].base_mm.allFinite()) throw ConfigError("digit base must be finite");
  }
  for (int i = 0; i < kNumJoints; ++i) {
    if (!(limits[i].theta_min < limits[i].theta_max)) {
      throw ConfigError("joint limits must satisfy min < max for " + to_string(JointId::from_index(i)));
    }
  }
  std::set<int> motors;
  for (int i = 0; i < kNumJoints; ++i) {
    if (actuation_map[i] < 0 || actuation_map[i] >= kNumMotors) {
      throw ConfigError("actuation map entry out of range for " + to_string(JointId::from_index(i)));
    }
    motors.insert(actuation_map[i]);
  }
  if (motors.size() != static_cast<size_t>(kNumMotors)) {
    throw ConfigError("actuation map must use exactly 16 distinct motors, got " + std::to_string(motors.size()));
  }
  for (const auto& [pip, dip] : coupling) {
    if (pip.kind != JointKind::PIP || dip.kind != JointKind::DIP || pip.finger != dip.finger) {
      throw ConfigError("coupling pairs must be (PIP, DIP) of the same finger");
    }
    if (motor_of(pip) != motor_of(dip)) throw ConfigError("coupled joints must share one motor");
  }
  // Every shared motor must be explained by a coupling pair.
  for (int m = 0; m < kNumMotors; ++m) {
    int count = 0;
    for (int i = 0; i < kNumJoints; ++i) count += actuation_map[i] == m;
    if (count > 1) {
      bool explained = false;
      for (const auto& [pip, dip] : coupling) explained = explained || motor_of(pip) == m;
      if (count > 2 || !explained) throw ConfigError("motor " + std::to_string(m) + " shared by uncoupled joints");
    }
  }
  if (!wrist_pivot_mm.allFinite()) throw ConfigError("wrist pivot must be finite");
  if (!(thumb_cmc_axis.norm() > 1e-9)) throw ConfigError("thumb CMC axis must be nonzero");
}

HandModel build_default_model() {
  HandModel m;
  using namespace joints;

  // Thumb, index, middle, ring, pinky; palm frame x distal, y radial (thumb side), z dorsal.
  m.digits[0] = {{25.0, 28.0, -10.0}, 50.0, 15.0, {45.0, 33.0, 28.0}, 1.0};
  m.digits[1] = {{95.0, 25.0, 0.0}, 0.0, 0.0, {45.0, 27.0, 20.0}, 1.0};
  m.digits[2] = {{97.0, 3.0, 0.0}, 0.0, 0.0, {50.0, 31.0, 22.0}, 0.0};
  m.digits[3] = {{92.0, -18.0, 0.0}, -5.0, 0.0, {46.0, 30.0, 21.0}, -1.0};
  m.digits[4] = {{83.0, -37.0, 0.0}, -12.0, 0.0, {37.0, 22.0, 19.0}, -1.0};

  auto set = [&](JointId j, double lo, double hi, int motor) {
    m.limits[j.index()] = {lo, hi};
    m.actuation_map[j.index()] = motor;
  };
  set(kThumbCmc, 0.0, 170.0, 0);
  set(kThumbMcp, 0.0, 90.0, 1);
  set(kThumbIp, 0.0, 120.0, 2);
  set(kIndexAbd, 0.0, 20.0, 3);
  set(kIndexMcp, 0.0, 140.0, 4);
  set(kIndexPip, 0.0, 120.0, 5);
  set(kIndexDip, 0.0, 120.0, 5);
  set(kMiddleMcp, 0.0, 140.0, 6);
  set(kMiddlePip, 0.0, 120.0, 7);
  set(kMiddleDip, 0.0, 120.0, 7);
  set(kRingAbd, 0.0, 23.0, 8);
  set(kRingMcp, 0.0, 140.0, 9);
  set(kRingPip, 0.0, 120.0, 10);
  set(kRingDip, 0.0, 120.0, 10);
  set(kPinkyAbd, 0.0, 45.0, 11);
  set(kPinkyMcp, 0.0, 140.0, 12);
  set(kPinkyPip, 0.0, 120.0, 13);
  set(kPinkyDip, 0.0, 120.0, 13);
  set(kWristFe, -30.0, 45.0, 14);
  set(kWristRud, -35.0, 35.0, 15);

  m.coupling = {{kIndexPip, kIndexDip}, {kMiddlePip, kMiddleDip}, {kRingPip, kRingDip}, {kPinkyPip, kPinkyDip}};
  m.wrist_pivot_mm = {-10.0, 0.0, 0.0};
  m.thumb_cmc_axis = Eigen::Vector3d(0.35, 0.6, 0.72).normalized();
  m.validate();
  return m;
}

bool is_limit_valid(const HandModel& model, const JointState& state) {
  for (int i = 0; i < kNumJoints; ++i) {
    if (!std::isfinite(state.angles[i]) || !model.limits[i].contains(state.angles[i])) return false;
  }
  return true;
}

JointState clamp_to_limits(const HandModel& model, const JointState& state) {
  if (!state.all_finite()) throw ValidationError("joint state contains non-finite angles");
  JointState out = state;
  for (int i = 0; i < kNumJoints; ++i) out.angles[i] = model.limits[i].clamp(state.angles[i]);
  return out;
}

JointState apply_coupling(const HandModel& model, const JointState& state, CouplingMode mode) {
  if (mode == CouplingMode::Free) return state;
  JointState out = state;
  for (const auto& [pip, dip] : model.coupling) out[dip] = model.limits_of(dip).clamp(state[pip]);
  return out;
}

KeypointSet forward_kinematics(const HandModel& model, const JointState& state) {
  using joints::kWristFe;
  using joints::kWristRud;
  static constexpr Finger kDigitFingers[kNumDigits] = {Finger::Thumb, Finger::Index, Finger::Middle, Finger::Ring,
                                                       Finger::Pinky};

  const RigidTransformd wrist = wrist_transform(state[kWristFe], state[kWristRud], Vec3<double>(model.wrist_pivot_mm));
  const Eigen::Vector3d x = Eigen::Vector3d::UnitX();

  KeypointSet kp;
  kp.col(0) = wrist * Eigen::Vector3d::Zero();

  for (int d = 0; d < kNumDigits; ++d) {
    const DigitGeometry& g = model.digits[d];
    const Finger f = kDigitFingers[d];
    const Eigen::Matrix3d base = rot_z(g.yaw_deg) * rot_y(g.pitch_deg);

    std::array<Eigen::Matrix3d, 3> frames;
    if (f == Finger::Thumb) {
      const Eigen::Matrix3d cmc =
          Eigen::AngleAxisd(deg_to_rad(state[joints::kThumbCmc]), model.thumb_cmc_axis.normalized()).toRotationMatrix();
      frames[0] = base * cmc;
      frames[1] = frames[0] * rot_y(state[joints::kThumbMcp]);
      frames[2] = frames[1] * rot_y(state[joints::kThumbIp]);
    } else {
      const double abd = f == Finger::Middle ? 0.0 : state[JointId{f, JointKind::Abduction}];
      frames[0] = base * rot_z(g.abduction_sign * abd) * rot_y(state[JointId{f, JointKind::MCP}]);
      frames[1] = frames[0] * rot_y(state[JointId{f, JointKind::PIP}]);
      frames[2] = frames[1] * rot_y(state[JointId{f, JointKind::DIP}]);
    }

    Eigen::Vector3d p = g.base_mm;
    kp.col(keypoint_index(d, 0)) = wrist * p;
    for (int k = 0; k < 3; ++k) {
      p += g.links_mm[k] * (frames[k] * x);
      kp.col(keypoint_index(d, k + 1)) = wrist * p;
    }
  }
  return kp;
}

LinkVectors link_vectors_from_keypoints(const KeypointSet& keypoints) {
  LinkVectors v;
  for (int d = 0; d < kNumDigits; ++d) {
    for (int k = 0; k < 3; ++k) {
      v.col(3 * d + k) = (keypoints.col(keypoint_index(d, k + 1)) - keypoints.col(keypoint_index(d, k))).normalized();
    }
  }
  return v;
}

}  // namespace handctl
