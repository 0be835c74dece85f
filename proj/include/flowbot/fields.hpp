#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "flowbot/scene.hpp"

namespace flowbot {

/// Per-point motion direction (flow) and vector-to-axis (projection) fields.
/// Off-mask entries are exactly zero.
struct DenseFields {
  std::vector<Eigen::Vector3d> flow;
  std::vector<Eigen::Vector3d> projection;
  std::vector<std::uint8_t> mask;
};

/// Ground-truth flow field: the direction each masked point moves under an
/// infinitesimal +dq (opening) displacement of the joint, normalized so the
/// largest masked magnitude is 1. Prismatic parts translate uniformly, so
/// every masked point gets the unit axis direction. Throws DegenerateError
/// for a revolute joint whose masked points all sit on the axis, or when the
/// mask is empty.
std::vector<Eigen::Vector3d> gt_articulation_flow(const Observation& obs, const JointSpec& joint);

/// Ground-truth projection field: r_p points from each masked point to its
/// nearest point on the joint axis.
std::vector<Eigen::Vector3d> gt_articulation_projection(const Observation& obs,
                                                        const JointSpec& joint);

/// Both fields plus a copy of the observation mask.
DenseFields gt_fields(const Observation& obs, const JointSpec& joint);

/// Mean over all points of the squared L2 distance between concatenated
/// (flow, projection) vectors. Throws std::invalid_argument on length
/// mismatch.
double field_error(const DenseFields& predicted, const DenseFields& truth);

/// Nearest point to p on the line through `origin` along unit `direction`.
Eigen::Vector3d nearest_point_on_axis(const Eigen::Vector3d& p, const Eigen::Vector3d& origin,
                                      const Eigen::Vector3d& direction);

struct LoadedFields {
  std::vector<Eigen::Vector3d> points;
  DenseFields fields;
};

inline constexpr const char* kFieldsCsvHeader = "idx,x,y,z,fx,fy,fz,rx,ry,rz,mask";

/// CSV with header idx,x,y,z,fx,fy,fz,rx,ry,rz,mask; floats carry 17
/// significant digits so values round-trip exactly.
void write_fields_csv(const Observation& obs, const DenseFields& fields, const std::string& path);

/// Strict reader for the same format; errors carry the offending row number.
LoadedFields read_fields_csv(const std::string& path);

}  // namespace flowbot
