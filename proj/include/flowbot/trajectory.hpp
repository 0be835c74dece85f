#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "flowbot/estimation.hpp"

namespace flowbot {

/// Rotation by `angle` (radians) about unit `axis`:
///   R = I + sin(a) [k]_x + (1 - cos(a)) [k]_x^2.
/// The axis is renormalized internally; a zero axis throws
/// std::invalid_argument.
Eigen::Matrix3d rodrigues(const Eigen::Vector3d& axis, double angle);

struct TrajectoryParams {
  int waypoint_count = 20;  // K; waypoints are indexed 0..K
  double goal_angle = 0.0;  // phi_g, radians (revolute)
  double goal_length = 0.0; // l_g, meters (prismatic)
};

struct TrajectoryPlan {
  JointType kind = JointType::Revolute;
  std::vector<Eigen::Vector3d> waypoints;     // K+1 points, waypoint 0 = start
  std::vector<Eigen::Matrix3d> orientations;  // empty, or K+1 frames
};

/// Circular arc about the estimated axis:
///   waypoint_i = R(i/K * phi_g)(p - v) + v.
/// Throws DegenerateError when p lies on the axis (distance <= 1e-9).
TrajectoryPlan plan_revolute(const Eigen::Vector3d& contact, const Eigen::Vector3d& axis_direction,
                             const Eigen::Vector3d& axis_origin, const TrajectoryParams& params);

/// Straight line along the normalized flow: waypoint_i = p + i/K * l_g * d.
/// Throws DegenerateError when the direction is near zero (<= 1e-9).
TrajectoryPlan plan_prismatic(const Eigen::Vector3d& contact, const Eigen::Vector3d& direction,
                              const TrajectoryParams& params);

/// End-effector orientation chain: q_i = R(phi_g / K) * q_{i-1}, accumulated
/// iteratively from q_0 (K+1 frames).
std::vector<Eigen::Matrix3d> ee_orientation_chain(const Eigen::Matrix3d& initial,
                                                  const Eigen::Vector3d& axis_direction,
                                                  const TrajectoryParams& params);

/// Positions plus orientations: revolute plans pair the arc with the
/// orientation chain; prismatic plans keep the initial orientation at every
/// waypoint.
TrajectoryPlan plan_full_pose(const Eigen::Vector3d& contact, const Eigen::Matrix3d& initial,
                              const AxisEstimate& estimate, const TrajectoryParams& params);

inline constexpr const char* kTrajectoryCsvHeader = "step,x,y,z,qw,qx,qy,qz";

/// CSV step,x,y,z,qw,qx,qy,qz (identity quaternion when the plan has no
/// orientations), 17 significant digits.
void write_trajectory_csv(const TrajectoryPlan& plan, const std::string& path);

}  // namespace flowbot
