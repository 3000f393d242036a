#include "handctl/retarget.hpp"

#include <cmath>
#include <string>

#include <json.hpp>

#include "handctl/errors.hpp"

namespace handctl {
namespace {

constexpr double kMinLinkMeters = 1e-3;
constexpr double kRestartCost = 1e-8;

std::vector<int> digit_joints(int digit) {
  using namespace joints;
  switch (digit) {
    case 0: return {kThumbCmc.index(), kThumbMcp.index(), kThumbIp.index()};
    case 1: return {kIndexAbd.index(), kIndexMcp.index(), kIndexPip.index(), kIndexDip.index()};
    case 2: return {kMiddleMcp.index(), kMiddlePip.index(), kMiddleDip.index()};
    case 3: return {kRingAbd.index(), kRingMcp.index(), kRingPip.index(), kRingDip.index()};
    default: return {kPinkyAbd.index(), kPinkyMcp.index(), kPinkyPip.index(), kPinkyDip.index()};
  }
}

/// Weighted residual of one digit's three links.
class DigitProblem {
 public:
  DigitProblem(const HandModel& model, const LinkVectors& human, const RetargetConfig& cfg, int digit)
      : model_(model), human_(human), cfg_(cfg), digit_(digit), vars_(digit_joints(digit)) {
    for (int k = 0; k < 3; ++k) sqrt_w_[k] = std::sqrt(cfg.weights[3 * digit + k]);
  }

  int size() const { return static_cast<int>(vars_.size()); }
  const std::vector<int>& vars() const { return vars_; }

  Eigen::Matrix<double, 9, 1> residual(const JointState& s) const {
    const LinkVectors v = link_vectors(model_, s);
    Eigen::Matrix<double, 9, 1> r;
    for (int k = 0; k < 3; ++k) {
      const int link = 3 * digit_ + k;
      r.segment<3>(3 * k) = sqrt_w_[k] * (human_.col(link) - v.col(link));
    }
    return r;
  }

  double cost(const JointState& s) const { return residual(s).squaredNorm(); }

  Eigen::MatrixXd jacobian(const JointState& s) const {
    Eigen::MatrixXd jac(9, size());
    const double h = cfg_.fd_step_deg;
    for (int j = 0; j < size(); ++j) {
      JointState plus = s, minus = s;
      plus.angles[vars_[j]] += h;
      minus.angles[vars_[j]] -= h;
      jac.col(j) = (residual(plus) - residual(minus)) / (2.0 * h);
    }
    return jac;
  }

  void clamp(JointState& s) const {
    for (int v : vars_) s.angles[v] = model_.limits[v].clamp(s.angles[v]);
  }

 private:
  const HandModel& model_;
  const LinkVectors& human_;
  const RetargetConfig& cfg_;
  int digit_;
  std::vector<int> vars_;
  std::array<double, 3> sqrt_w_{};
};

struct DigitSolve {
  JointState state;
  double cost = 0.0;
  int iters = 0;
  bool converged = false;
};

/// Accepted steps are appended to `trace` as decrements of its last entry.
DigitSolve solve_digit(const DigitProblem& prob, const HandModel& model, JointState x, const RetargetConfig& cfg,
                       std::vector<double>* trace) {
  prob.clamp(x);
  double cost = prob.cost(x);
  double mu = cfg.damping;
  DigitSolve out{x, cost, 0, false};

  const int n = prob.size();
  for (int it = 0; it < cfg.max_iters; ++it) {
    out.iters = it + 1;
    if (cost < 1e-30) {
      out.converged = true;
      break;
    }
    const Eigen::Matrix<double, 9, 1> r = prob.residual(x);
    const Eigen::MatrixXd jac = prob.jacobian(x);
    const Eigen::VectorXd grad = jac.transpose() * r;

    // Bound-active variables whose descent direction leaves the box stay fixed.
    std::vector<int> free;
    for (int j = 0; j < n; ++j) {
      const int v = prob.vars()[j];
      const JointLimits& lim = model.limits[v];
      const bool at_lo = x.angles[v] <= lim.theta_min && grad[j] > 0;
      const bool at_hi = x.angles[v] >= lim.theta_max && grad[j] < 0;
      if (!at_lo && !at_hi) free.push_back(j);
    }
    if (free.empty()) {
      out.converged = true;
      break;
    }
    Eigen::MatrixXd jf(9, free.size());
    Eigen::VectorXd gf(free.size());
    for (std::size_t k = 0; k < free.size(); ++k) {
      jf.col(k) = jac.col(free[k]);
      gf[k] = grad[free[k]];
    }
    const Eigen::MatrixXd normal = jf.transpose() * jf;

    bool accepted = false;
    double decrease = 0.0;
    for (int attempt = 0; attempt < 30; ++attempt) {
      Eigen::MatrixXd damped = normal;
      damped.diagonal().array() += mu * (normal.diagonal().array() + 1e-12);
      const Eigen::VectorXd delta = damped.ldlt().solve(-gf);
      JointState trial = x;
      for (std::size_t k = 0; k < free.size(); ++k) trial.angles[prob.vars()[free[k]]] += delta[k];
      prob.clamp(trial);
      const double trial_cost = prob.cost(trial);
      if (trial_cost < cost) {
        decrease = cost - trial_cost;
        x = trial;
        cost = trial_cost;
        mu = std::max(mu / 3.0, 1e-12);
        accepted = true;
        break;
      }
      mu *= 4.0;
    }
    if (!accepted) {
      out.converged = true;  // no descent direction left at this resolution
      break;
    }
    if (trace) trace->push_back(trace->back() - decrease);
    if (decrease < cfg.tol) {
      out.converged = true;
      break;
    }
  }
  out.state = x;
  out.cost = cost;
  return out;
}

}  // namespace

void RetargetConfig::validate() const {
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("retarget weights must be finite and >= 0");
  }
  if (max_iters < 1) throw ConfigError("retarget max_iters must be >= 1");
  if (!(tol > 0.0)) throw ConfigError("retarget tol must be > 0");
  if (!(damping > 0.0)) throw ConfigError("retarget damping must be > 0");
  if (!(smoothing_lambda >= 0.0 && smoothing_lambda <= 1.0)) {
    throw ConfigError("smoothing_lambda must be in [0, 1]");
  }
  if (!(fd_step_deg > 0.0)) throw ConfigError("finite-difference step must be > 0");
}

LinkVectors extract_human_vectors(const HumanHandPose& pose) {
  if (!pose.keypoints.allFinite()) throw DegeneratePoseError("pose contains non-finite keypoints");
  LinkVectors v;
  for (int d = 0; d < kNumDigits; ++d) {
    for (int k = 0; k < 3; ++k) {
      const Eigen::Vector3d link =
          pose.keypoints.col(keypoint_index(d, k + 1)) - pose.keypoints.col(keypoint_index(d, k));
      const double len = link.norm();
      if (!(len >= kMinLinkMeters)) {
        throw DegeneratePoseError("link " + std::to_string(3 * d + k) + " shorter than 1 mm");
      }
      v.col(3 * d + k) = link / len;
    }
  }
  return v;
}

double retarget_cost(const LinkVectors& human, const LinkVectors& robot, const std::array<double, kNumLinks>& weights) {
  double cost = 0.0;
  for (int i = 0; i < kNumLinks; ++i) cost += weights[i] * (human.col(i) - robot.col(i)).squaredNorm();
  return cost;
}

RetargetResult solve_retarget(const HumanHandPose& pose, const HandModel& model, const JointState& warm_start,
                              const RetargetConfig& cfg) {
  cfg.validate();
  if (!warm_start.all_finite()) throw ValidationError("warm start must be finite");
  const LinkVectors human = extract_human_vectors(pose);

  JointState x = clamp_to_limits(model, warm_start);
  RetargetResult result;
  result.converged = true;
  result.cost_history.push_back(retarget_cost(human, link_vectors(model, x), cfg.weights));

  for (int d = 0; d < kNumDigits; ++d) {
    const DigitProblem prob(model, human, cfg, d);
    DigitSolve best = solve_digit(prob, model, x, cfg, &result.cost_history);
    result.iters += best.iters;

    if (cfg.multi_start && best.cost > kRestartCost) {
      // Seeds at the quarter points of each joint range, plus the box centre.
      const int n = prob.size();
      for (int mask = 0; mask <= (1 << n); ++mask) {
        JointState seed = x;
        for (int j = 0; j < n; ++j) {
          const JointLimits& lim = model.limits[prob.vars()[j]];
          const double frac = mask == (1 << n) ? 0.5 : ((mask >> j) & 1 ? 0.75 : 0.25);
          seed.angles[prob.vars()[j]] = lim.theta_min + frac * lim.span();
        }
        DigitSolve alt = solve_digit(prob, model, seed, cfg, nullptr);
        result.iters += alt.iters;
        if (alt.cost < best.cost) {
          result.cost_history.push_back(result.cost_history.back() - (best.cost - alt.cost));
          best = alt;
        }
        if (best.cost <= kRestartCost) break;
      }
    }
    for (int v : prob.vars()) x.angles[v] = best.state.angles[v];
    result.converged = result.converged && best.converged;
  }

  result.theta = x;
  result.residual = retarget_cost(human, link_vectors(model, x), cfg.weights);
  return result;
}

JointState smooth_step(const JointState& theta_new, const JointState& theta_prev, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("smoothing lambda must be in [0, 1]");
  if (lambda == 1.0) return theta_new;
  if (lambda == 0.0) return theta_prev;
  JointState out;
  out.angles = lambda * theta_new.angles + (1.0 - lambda) * theta_prev.angles;
  return out;
}

std::optional<HumanHandPose> read_pose_line(std::istream& in) {
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = nlohmann::json::parse(line);
    const auto& kps = j.at("keypoints");
    if (!kps.is_array() || kps.size() != kNumKeypoints) {
      throw ValidationError("keypoint record must hold 21 [x,y,z] triples");
    }
    HumanHandPose pose;
    pose.timestamp = j.at("t").get<double>();
    for (int i = 0; i < kNumKeypoints; ++i) {
      if (kps[i].size() != 3) throw ValidationError("keypoint must have 3 coordinates");
      for (int a = 0; a < 3; ++a) pose.keypoints(a, i) = kps[i][a].get<double>();
    }
    return pose;
  }
  return std::nullopt;
}

void write_pose_line(std::ostream& out, const HumanHandPose& pose) {
  nlohmann::json kps = nlohmann::json::array();
  for (int i = 0; i < kNumKeypoints; ++i) {
    kps.push_back({pose.keypoints(0, i), pose.keypoints(1, i), pose.keypoints(2, i)});
  }
  out << nlohmann::json{{"t", pose.timestamp}, {"keypoints", kps}}.dump() << '\n';
}

HumanHandPose pose_from_keypoints(const KeypointSet& keypoints_mm, double timestamp) {
  return {keypoints_mm / 1000.0, timestamp};
}

}  // namespace handctl
