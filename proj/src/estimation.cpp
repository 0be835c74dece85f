#include "flowbot/estimation.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "flowbot/errors.hpp"

namespace flowbot {

GramSchmidtResult gram_schmidt_correct(const Eigen::Vector3d& flow,
                                       const Eigen::Vector3d& projection) {
  const double flow_norm = flow.norm();
  if (flow_norm <= 1e-9) return {projection, false};
  const Eigen::Vector3d f_hat = flow / flow_norm;
  return {projection - projection.dot(f_hat) * f_hat, true};
}

std::optional<PointAxisEstimate> estimate_axis_pointwise(const Eigen::Vector3d& p,
                                                         const Eigen::Vector3d& flow,
                                                         const Eigen::Vector3d& projection,
                                                         bool use_gs) {
  const Eigen::Vector3d r = use_gs ? gram_schmidt_correct(flow, projection).projection
                                   : projection;
  const Eigen::Vector3d cross = r.cross(flow);
  const double cross_norm = cross.norm();
  if (cross_norm <= 1e-9) return std::nullopt;

  PointAxisEstimate estimate;
  estimate.direction = cross / cross_norm;
  estimate.origin = p + r;
  // Orient the axis so that a positive rotation moves p along the flow.
  if (estimate.direction.cross(p - estimate.origin).dot(flow) < 0.0)
    estimate.direction = -estimate.direction;
  return estimate;
}

AxisEstimate aggregate_axis(const Observation& obs, const DenseFields& fields, JointType type,
                            bool use_gs, bool use_mask) {
  const std::size_t n = obs.points.size();
  if (fields.flow.size() != n || fields.projection.size() != n)
    throw std::invalid_argument("aggregate_axis: field length mismatch with observation");

  AxisEstimate estimate;
  estimate.type = type;

  if (type == JointType::Prismatic) {
    Eigen::Vector3d flow_sum = Eigen::Vector3d::Zero();
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    int support = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (use_mask && !obs.mask[i]) continue;
      if (fields.flow[i].norm() <= 1e-9) continue;  // zero-field points carry no direction
      flow_sum += fields.flow[i];
      centroid += obs.points[i];
      ++support;
    }
    if (support == 0 || flow_sum.norm() <= 1e-9)
      throw DegenerateError("aggregate_axis: no usable points for a prismatic estimate");
    estimate.direction = flow_sum.normalized();
    estimate.origin = centroid / support;
    estimate.support_count = support;
    return estimate;
  }

  Eigen::Vector3d direction_sum = Eigen::Vector3d::Zero();
  Eigen::Vector3d origin_sum = Eigen::Vector3d::Zero();
  std::optional<Eigen::Vector3d> reference;
  int support = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (use_mask && !obs.mask[i]) continue;
    const auto point = estimate_axis_pointwise(obs.points[i], fields.flow[i],
                                               fields.projection[i], use_gs);
    if (!point) continue;
    // Sign-align to the first non-degenerate estimate before averaging so
    // antipodal duplicates do not cancel.
    if (!reference) reference = point->direction;
    const double sign = point->direction.dot(*reference) < 0.0 ? -1.0 : 1.0;
    direction_sum += sign * point->direction;
    origin_sum += point->origin;
    ++support;
  }
  if (support == 0 || direction_sum.norm() <= 1e-9)
    throw DegenerateError("aggregate_axis: no usable points for a revolute estimate");
  estimate.direction = direction_sum.normalized();
  estimate.origin = origin_sum / support;
  estimate.support_count = support;
  return estimate;
}

ClassifierMode classifier_mode_from_string(const std::string& s) {
  if (s == "oracle") return ClassifierMode::Oracle;
  if (s == "heuristic") return ClassifierMode::Heuristic;
  throw ParseError("unknown classifier mode '" + s + "'");
}

JointType classify_articulation(const ArticulatedScene& scene, const Observation& obs,
                                const DenseFields& fields, ClassifierMode mode) {
  if (mode == ClassifierMode::Oracle) return scene.target_joint().type;

  // Prismatic parts translate rigidly, so every masked flow points the same
  // way; mean pairwise cosine ~1. Computed via ||sum of unit flows||^2 =
  // n + 2 * sum of pairwise dots.
  Eigen::Vector3d unit_sum = Eigen::Vector3d::Zero();
  double count = 0.0;
  for (std::size_t i = 0; i < obs.points.size(); ++i) {
    if (!obs.mask[i]) continue;
    const double norm = fields.flow[i].norm();
    if (norm <= 1e-9) continue;
    unit_sum += fields.flow[i] / norm;
    count += 1.0;
  }
  if (count < 2.0) return JointType::Prismatic;
  const double mean_pairwise_cosine =
      (unit_sum.squaredNorm() - count) / (count * (count - 1.0));
  return mean_pairwise_cosine > 0.99 ? JointType::Prismatic : JointType::Revolute;
}

std::string axis_estimate_to_json(const AxisEstimate& estimate) {
  nlohmann::ordered_json j;
  j["type"] = to_string(estimate.type);
  j["omega"] = {estimate.direction.x(), estimate.direction.y(), estimate.direction.z()};
  j["origin"] = {estimate.origin.x(), estimate.origin.y(), estimate.origin.z()};
  j["support"] = estimate.support_count;
  return j.dump();
}

AxisEstimate axis_estimate_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("axis JSON: ") + e.what());
  }
  try {
    AxisEstimate estimate;
    estimate.type = joint_type_from_string(j.at("type").get<std::string>());
    const auto omega = j.at("omega");
    const auto origin = j.at("origin");
    if (omega.size() != 3 || origin.size() != 3)
      throw ParseError("axis JSON: omega/origin must have 3 components");
    for (int c = 0; c < 3; ++c) {
      estimate.direction[c] = omega.at(c).get<double>();
      estimate.origin[c] = origin.at(c).get<double>();
    }
    estimate.support_count = j.at("support").get<int>();
    if (estimate.direction.norm() < 1e-12)
      throw ParseError("axis JSON: omega must be nonzero");
    return estimate;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("axis JSON: ") + e.what());
  }
}

}  // namespace flowbot
