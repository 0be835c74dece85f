#include "flowbot/trajectory.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <fstream>

#include "flowbot/detail/format.hpp"
#include "flowbot/errors.hpp"

namespace flowbot {

Eigen::Matrix3d rodrigues(const Eigen::Vector3d& axis, double angle) {
  const double norm = axis.norm();
  if (norm < 1e-12) throw std::invalid_argument("rodrigues: zero-length axis");
  const Eigen::Vector3d k = axis / norm;

  Eigen::Matrix3d k_cross;
  k_cross << 0.0, -k.z(), k.y(),
             k.z(), 0.0, -k.x(),
            -k.y(), k.x(), 0.0;
  return Eigen::Matrix3d::Identity() + std::sin(angle) * k_cross +
         (1.0 - std::cos(angle)) * (k_cross * k_cross);
}

namespace {

void check_params(const TrajectoryParams& params) {
  if (params.waypoint_count < 1)
    throw std::invalid_argument("trajectory: waypoint count K must be >= 1");
}

}  // namespace

TrajectoryPlan plan_revolute(const Eigen::Vector3d& contact, const Eigen::Vector3d& axis_direction,
                             const Eigen::Vector3d& axis_origin, const TrajectoryParams& params) {
  check_params(params);
  const double norm = axis_direction.norm();
  if (norm < 1e-12) throw DegenerateError("plan_revolute: zero-length axis");
  const Eigen::Vector3d k = axis_direction / norm;

  const Eigen::Vector3d arm = contact - axis_origin;
  if ((arm - k * k.dot(arm)).norm() <= 1e-9)
    throw DegenerateError("plan_revolute: contact point lies on the rotation axis");

  TrajectoryPlan plan;
  plan.kind = JointType::Revolute;
  const int K = params.waypoint_count;
  plan.waypoints.reserve(K + 1);
  plan.waypoints.push_back(contact);
  for (int i = 1; i <= K; ++i) {
    const double phi = params.goal_angle * static_cast<double>(i) / static_cast<double>(K);
    plan.waypoints.push_back(rodrigues(k, phi) * arm + axis_origin);
  }
  return plan;
}

TrajectoryPlan plan_prismatic(const Eigen::Vector3d& contact, const Eigen::Vector3d& direction,
                              const TrajectoryParams& params) {
  check_params(params);
  const double norm = direction.norm();
  if (norm <= 1e-9) throw DegenerateError("plan_prismatic: near-zero direction");
  const Eigen::Vector3d d = direction / norm;

  TrajectoryPlan plan;
  plan.kind = JointType::Prismatic;
  const int K = params.waypoint_count;
  plan.waypoints.reserve(K + 1);
  plan.waypoints.push_back(contact);
  for (int i = 1; i <= K; ++i) {
    const double step = params.goal_length * static_cast<double>(i) / static_cast<double>(K);
    plan.waypoints.push_back(contact + step * d);
  }
  return plan;
}

std::vector<Eigen::Matrix3d> ee_orientation_chain(const Eigen::Matrix3d& initial,
                                                  const Eigen::Vector3d& axis_direction,
                                                  const TrajectoryParams& params) {
  check_params(params);
  const int K = params.waypoint_count;
  // World-frame increment applied on the left, accumulated step by step.
  const Eigen::Matrix3d increment = rodrigues(axis_direction, params.goal_angle / K);
  std::vector<Eigen::Matrix3d> chain;
  chain.reserve(K + 1);
  chain.push_back(initial);
  for (int i = 1; i <= K; ++i) chain.push_back(increment * chain.back());
  return chain;
}

TrajectoryPlan plan_full_pose(const Eigen::Vector3d& contact, const Eigen::Matrix3d& initial,
                              const AxisEstimate& estimate, const TrajectoryParams& params) {
  if (estimate.type == JointType::Revolute) {
    TrajectoryPlan plan =
        plan_revolute(contact, estimate.direction, estimate.origin, params);
    plan.orientations = ee_orientation_chain(initial, estimate.direction, params);
    return plan;
  }
  TrajectoryPlan plan = plan_prismatic(contact, estimate.direction, params);
  plan.orientations.assign(plan.waypoints.size(), initial);
  return plan;
}

void write_trajectory_csv(const TrajectoryPlan& plan, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write trajectory CSV '" + path + "'");
  out << kTrajectoryCsvHeader << "\n";
  for (std::size_t i = 0; i < plan.waypoints.size(); ++i) {
    Eigen::Quaterniond q = Eigen::Quaterniond::Identity();
    if (!plan.orientations.empty()) q = Eigen::Quaterniond(plan.orientations[i]);
    const Eigen::Vector3d& p = plan.waypoints[i];
    out << i << ',' << detail::g17(p.x()) << ',' << detail::g17(p.y()) << ','
        << detail::g17(p.z()) << ',' << detail::g17(q.w()) << ',' << detail::g17(q.x()) << ','
        << detail::g17(q.y()) << ',' << detail::g17(q.z()) << "\n";
  }
  if (!out) throw IoError("failed while writing '" + path + "'");
}

}  // namespace flowbot
