#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>

#include "flowbot/fields.hpp"
#include "flowbot/scene.hpp"

namespace flowbot {

struct GramSchmidtResult {
  Eigen::Vector3d projection;
  /// False when the flow was too small to define a direction and the input
  /// was returned unchanged.
  bool applied = false;
};

/// Removes the flow-parallel component of r_p. Skipped (flagged) when
/// ||f_p|| <= 1e-9.
GramSchmidtResult gram_schmidt_correct(const Eigen::Vector3d& flow,
                                       const Eigen::Vector3d& projection);

struct PointAxisEstimate {
  Eigen::Vector3d direction;  // unit
  Eigen::Vector3d origin;
};

/// Single-point axis estimate: direction from the (corrected) projection x
/// flow cross product, origin from p + r_p. The direction sign is chosen so
/// that rotating p forward moves it along f_p. Returns nullopt when the
/// cross product is degenerate (point excluded from aggregation).
std::optional<PointAxisEstimate> estimate_axis_pointwise(const Eigen::Vector3d& p,
                                                         const Eigen::Vector3d& flow,
                                                         const Eigen::Vector3d& projection,
                                                         bool use_gs);

struct AxisEstimate {
  JointType type = JointType::Revolute;
  Eigen::Vector3d direction = Eigen::Vector3d::UnitZ();  // unit
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  int support_count = 0;
};

/// Mask-aggregated axis estimate. Revolute: per-point estimates are
/// sign-aligned to the first non-degenerate point, averaged, and
/// renormalized; the origin is the mean per-point origin. Prismatic: the
/// direction is the normalized mean flow and the origin is the centroid of
/// the supporting points. With use_mask=false every point is a candidate
/// (zero-field points are dropped as degenerate). Throws DegenerateError
/// when no usable points remain.
AxisEstimate aggregate_axis(const Observation& obs, const DenseFields& fields, JointType type,
                            bool use_gs, bool use_mask);

enum class ClassifierMode { Oracle, Heuristic };

ClassifierMode classifier_mode_from_string(const std::string& s);

/// Oracle mode reads the scene's target joint type. Heuristic mode declares
/// prismatic when the mean pairwise cosine similarity of masked flow
/// directions exceeds 0.99.
JointType classify_articulation(const ArticulatedScene& scene, const Observation& obs,
                                const DenseFields& fields, ClassifierMode mode);

/// {"type": ..., "omega": [...], "origin": [...], "support": n}
std::string axis_estimate_to_json(const AxisEstimate& estimate);
AxisEstimate axis_estimate_from_json(const std::string& text);

}  // namespace flowbot
