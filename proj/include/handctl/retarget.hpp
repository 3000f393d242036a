#pragma once

#include <array>
#include <istream>
#include <optional>
#include <ostream>
#include <vector>

#include "handctl/hand_model.hpp"

namespace handctl {

/// 21 human keypoints in meters, same layout as KeypointSet.
struct HumanHandPose {
  KeypointSet keypoints = KeypointSet::Zero();
  double timestamp = 0.0;  // seconds
};

struct RetargetConfig {
  std::array<double, kNumLinks> weights = filled(1.0);
  int max_iters = 100;
  double tol = 1e-12;        // stop once an accepted step lowers the cost by less than this
  double damping = 1e-3;     // initial Levenberg parameter
  double smoothing_lambda = 1.0;
  double fd_step_deg = 1e-4;  // central-difference step
  bool multi_start = true;    // retry poorly-fitting digits from spread seeds

  void validate() const;

 private:
  static std::array<double, kNumLinks> filled(double v) {
    std::array<double, kNumLinks> a{};
    a.fill(v);
    return a;
  }
};

struct RetargetResult {
  JointState theta;  // hand joints solved; wrist copied from the warm start
  double residual = 0.0;
  int iters = 0;
  bool converged = false;
  std::vector<double> cost_history;  // total cost at the warm start, then after each accepted step
};

/// Per-phalanx unit directions (distal - proximal). Throws DegeneratePoseError
/// if any link is shorter than 1 mm.
LinkVectors extract_human_vectors(const HumanHandPose& pose);

/// Weighted alignment cost sum_i w_i |u_i - v_i|^2.
double retarget_cost(const LinkVectors& human, const LinkVectors& robot, const std::array<double, kNumLinks>& weights);

/// Projected damped Gauss-Newton over the joint limits. The cost separates by
/// digit, so each digit's joints are solved on their own three links.
/// Wrist angles are held at the warm start.
RetargetResult solve_retarget(const HumanHandPose& pose, const HandModel& model, const JointState& warm_start,
                              const RetargetConfig& cfg = {});

/// lambda * theta_new + (1 - lambda) * theta_prev.
JointState smooth_step(const JointState& theta_new, const JointState& theta_prev, double lambda);

/// Keypoint stream: one JSON object per line, {"t": seconds, "keypoints": [[x,y,z] x 21]} in meters.
std::optional<HumanHandPose> read_pose_line(std::istream& in);
void write_pose_line(std::ostream& out, const HumanHandPose& pose);

/// Robot keypoints (mm) expressed as a human pose in meters.
HumanHandPose pose_from_keypoints(const KeypointSet& keypoints_mm, double timestamp = 0.0);

}  // namespace handctl
