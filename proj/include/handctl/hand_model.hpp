#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace handctl {

inline constexpr int kNumJoints = 20;
inline constexpr int kNumHandJoints = 18;
inline constexpr int kNumMotors = 16;
inline constexpr int kNumDigits = 5;
inline constexpr int kNumKeypoints = 21;
inline constexpr int kNumLinks = 15;

enum class Finger : std::uint8_t { Thumb, Index, Middle, Ring, Pinky, Wrist };

enum class JointKind : std::uint8_t { DIP, PIP, MCP, Abduction, CMC, IP, WristFE, WristRUD };

/// A (finger, kind) pair. Only 20 combinations name a real joint; see is_valid().
struct JointId {
  Finger finger;
  JointKind kind;

  /// Dense index 0..19 into JointState. Throws ValidationError for invalid pairs.
  int index() const;
  static JointId from_index(int index);

  friend bool operator==(JointId, JointId) = default;
};

bool is_valid(JointId id);

/// snake_case name such as "index_pip" or "wrist_fe".
std::string to_string(JointId id);
JointId joint_from_string(std::string_view name);

std::string_view to_string(Finger finger);

/// All 20 joints in index order.
const std::array<JointId, kNumJoints>& all_joints();

namespace joints {
inline constexpr JointId kThumbCmc{Finger::Thumb, JointKind::CMC};
inline constexpr JointId kThumbMcp{Finger::Thumb, JointKind::MCP};
inline constexpr JointId kThumbIp{Finger::Thumb, JointKind::IP};
inline constexpr JointId kIndexAbd{Finger::Index, JointKind::Abduction};
inline constexpr JointId kIndexMcp{Finger::Index, JointKind::MCP};
inline constexpr JointId kIndexPip{Finger::Index, JointKind::PIP};
inline constexpr JointId kIndexDip{Finger::Index, JointKind::DIP};
inline constexpr JointId kMiddleMcp{Finger::Middle, JointKind::MCP};
inline constexpr JointId kMiddlePip{Finger::Middle, JointKind::PIP};
inline constexpr JointId kMiddleDip{Finger::Middle, JointKind::DIP};
inline constexpr JointId kRingAbd{Finger::Ring, JointKind::Abduction};
inline constexpr JointId kRingMcp{Finger::Ring, JointKind::MCP};
inline constexpr JointId kRingPip{Finger::Ring, JointKind::PIP};
inline constexpr JointId kRingDip{Finger::Ring, JointKind::DIP};
inline constexpr JointId kPinkyAbd{Finger::Pinky, JointKind::Abduction};
inline constexpr JointId kPinkyMcp{Finger::Pinky, JointKind::MCP};
inline constexpr JointId kPinkyPip{Finger::Pinky, JointKind::PIP};
inline constexpr JointId kPinkyDip{Finger::Pinky, JointKind::DIP};
inline constexpr JointId kWristFe{Finger::Wrist, JointKind::WristFE};
inline constexpr JointId kWristRud{Finger::Wrist, JointKind::WristRUD};
}  // namespace joints

struct JointLimits {
  double theta_min = 0.0;  // degrees
  double theta_max = 0.0;

  double span() const { return theta_max - theta_min; }
  double clamp(double theta) const { return std::clamp(theta, theta_min, theta_max); }
  bool contains(double theta) const { return theta >= theta_min && theta <= theta_max; }
};

/// Joint angles in degrees, one slot per JointId::index().
struct JointState {
  Eigen::Matrix<double, kNumJoints, 1> angles = Eigen::Matrix<double, kNumJoints, 1>::Zero();

  double& operator[](JointId id) { return angles[id.index()]; }
  double operator[](JointId id) const { return angles[id.index()]; }

  bool all_finite() const { return angles.allFinite(); }
  static JointState Zero() { return {}; }

  friend bool operator==(const JointState& a, const JointState& b) { return a.angles == b.angles; }
};

template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;

/// 21 keypoints as columns: wrist, then {base, joint1, joint2, tip} per digit
/// in thumb, index, middle, ring, pinky order.
using KeypointSet = Eigen::Matrix<double, 3, kNumKeypoints>;
/// One unit direction per phalanx, digit-major (3 per digit).
using LinkVectors = Eigen::Matrix<double, 3, kNumLinks>;

inline constexpr int keypoint_index(int digit, int k) { return 1 + 4 * digit + k; }

template <typename Scalar>
constexpr Scalar deg_to_rad(Scalar deg) {
  return deg * static_cast<Scalar>(M_PI) / static_cast<Scalar>(180);
}
template <typename Scalar>
constexpr Scalar rad_to_deg(Scalar rad) {
  return rad * static_cast<Scalar>(180) / static_cast<Scalar>(M_PI);
}

template <typename Scalar>
Mat3<Scalar> rot_y(Scalar deg) {
  return Eigen::AngleAxis<Scalar>(deg_to_rad(deg), Vec3<Scalar>::UnitY()).toRotationMatrix();
}
template <typename Scalar>
Mat3<Scalar> rot_z(Scalar deg) {
  return Eigen::AngleAxis<Scalar>(deg_to_rad(deg), Vec3<Scalar>::UnitZ()).toRotationMatrix();
}

template <typename Scalar>
struct RigidTransform {
  Mat3<Scalar> rotation = Mat3<Scalar>::Identity();
  Vec3<Scalar> translation = Vec3<Scalar>::Zero();

  static RigidTransform Identity() { return {}; }

  Vec3<Scalar> operator*(const Vec3<Scalar>& p) const { return rotation * p + translation; }
  RigidTransform operator*(const RigidTransform& rhs) const {
    return {rotation * rhs.rotation, rotation * rhs.translation + translation};
  }

  /// Orthonormal with det +1 to within `tol`.
  bool is_valid(Scalar tol = Scalar(1e-9)) const {
    const Scalar ortho = (rotation.transpose() * rotation - Mat3<Scalar>::Identity()).cwiseAbs().maxCoeff();
    return ortho <= tol && std::abs(rotation.determinant() - Scalar(1)) <= tol;
  }
};

using RigidTransformd = RigidTransform<double>;

/// Flexion/extension about the forearm y axis, then radial/ulnar about z,
/// both through `pivot`: R = Rfe(alpha) * Rrud(beta), x' = pivot + R (x - pivot).
/// Flexion and radial deviation are positive.
template <typename Scalar>
RigidTransform<Scalar> wrist_transform(Scalar alpha_fe, Scalar beta_rud, const Vec3<Scalar>& pivot) {
  RigidTransform<Scalar> t;
  t.rotation = rot_y(alpha_fe) * rot_z(beta_rud);
  t.translation = pivot - t.rotation * pivot;
  return t;
}

struct DigitGeometry {
  Eigen::Vector3d base_mm = Eigen::Vector3d::Zero();  // knuckle (CMC for thumb) in palm frame
  double yaw_deg = 0.0;                               // rest splay about palm normal
  double pitch_deg = 0.0;                             // rest droop toward the palm
  std::array<double, 3> links_mm{};                   // proximal to distal
  double abduction_sign = 1.0;                        // +1 abducts toward thumb side
};

enum class CouplingMode : std::uint8_t { Rigid, Free };

struct HandModel {
  std::array<DigitGeometry, kNumDigits> digits{};
  std::array<JointLimits, kNumJoints> limits{};
  std::vector<std::pair<JointId, JointId>> coupling;  // (driver PIP, follower DIP)
  std::array<int, kNumJoints> actuation_map{};        // motor index per joint
  Eigen::Vector3d wrist_pivot_mm = Eigen::Vector3d::Zero();
  Eigen::Vector3d thumb_cmc_axis = Eigen::Vector3d::UnitY();  // in the thumb base frame

  const JointLimits& limits_of(JointId id) const { return limits[id.index()]; }
  int motor_of(JointId id) const { return actuation_map[id.index()]; }

  /// Joint whose angle commands `motor` (PIP for coupled curl motors).
  JointId driving_joint(int motor) const;

  /// Throws ConfigError if any structural invariant is broken.
  void validate() const;
};

/// Nominal range-of-motion limits, 16-motor actuation map, and human-proportioned geometry.
/// Identical to config/hand_model.json.
HandModel build_default_model();

bool is_limit_valid(const HandModel& model, const JointState& state);

JointState clamp_to_limits(const HandModel& model, const JointState& state);

/// Rigid: DIP := PIP (clamped to DIP limits) on each coupled finger. Free: identity.
JointState apply_coupling(const HandModel& model, const JointState& state, CouplingMode mode);

/// Palm-subtree keypoints in the forearm frame (mm). Wrist DOFs act on the whole palm.
KeypointSet forward_kinematics(const HandModel& model, const JointState& state);

LinkVectors link_vectors_from_keypoints(const KeypointSet& keypoints);

inline LinkVectors link_vectors(const HandModel& model, const JointState& state) {
  return link_vectors_from_keypoints(forward_kinematics(model, state));
}

}  // namespace handctl
