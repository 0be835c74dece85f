#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cstdint>
#include <string>
#include <vector>

namespace flowbot {

enum class JointType { Revolute, Prismatic };

std::string to_string(JointType type);
JointType joint_type_from_string(const std::string& s);

/// One articulated joint. `axis_direction` is unit length (normalized at
/// parse time); rotation/translation by +q moves the child toward open.
struct JointSpec {
  JointType type = JointType::Revolute;
  Eigen::Vector3d axis_direction = Eigen::Vector3d::UnitZ();
  Eigen::Vector3d axis_origin = Eigen::Vector3d::Zero();
  double limit_lower = 0.0;
  double limit_upper = 1.0;

  double range() const { return limit_upper - limit_lower; }
};

/// Axis-aligned box described by its center and edge lengths, plus how many
/// surface points a depth-camera stand-in draws from it.
struct PartGeometry {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d size = Eigen::Vector3d::Ones();
  int sample_count = 2000;
};

/// A link that moves on a joint relative to the static base.
struct ChildPart {
  std::string id;
  PartGeometry geometry;
  JointSpec joint;
};

struct BasePart {
  std::string id;
  PartGeometry geometry;
};

/// Depth-1 kinematic scene: static base boxes plus jointed child boxes, one
/// of which is the manipulation target.
class ArticulatedScene {
 public:
  std::string name;
  std::vector<BasePart> base_parts;
  std::vector<ChildPart> child_parts;
  std::string target_part;

  /// Flat part table: base parts first, then child parts.
  int part_count() const { return static_cast<int>(base_parts.size() + child_parts.size()); }
  const std::string& part_name(int index) const;
  const PartGeometry& part_geometry(int index) const;
  bool part_is_target(int index) const;
  int target_part_index() const;
  const ChildPart& target() const;
  const JointSpec& target_joint() const { return target().joint; }

  /// Throws ParseError if the structural invariants do not hold (joint per
  /// child, valid limits, unit axis, target present and articulated).
  void validate() const;
};

/// Point cloud with per-point provenance (part index into the scene's flat
/// part table, and the sample index within that part).
struct SampledCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<int> source_part;
  std::vector<int> source_index;
};

/// A rendered observation: posed points, per-point target mask (1 = point on
/// the target part that survived occlusion), provenance, and the joint
/// configuration it was taken at.
struct Observation {
  std::vector<Eigen::Vector3d> points;
  std::vector<std::uint8_t> mask;
  std::vector<int> source_part;
  std::vector<int> source_index;
  double config_q = 0.0;

  int mask_count() const;
};

/// Independent per-point dropout of target-part points. The dropout
/// probability grows linearly with the opening fraction:
///   p = base_dropout + opening_coupled_dropout * (q - lo) / (hi - lo).
struct OcclusionModel {
  double base_dropout = 0.0;
  double opening_coupled_dropout = 0.0;
  std::uint64_t seed = 0;
};

struct ParseOptions {
  /// Lenient mode downgrades unknown elements from errors to warnings.
  bool lenient = false;
  /// Collected warnings (lenient mode only).
  std::vector<std::string>* warnings = nullptr;
};

/// Parses the supported URDF subset. Throws ParseError with the offending
/// element named in the message.
ArticulatedScene parse_scene(const std::string& text, const ParseOptions& options = {});

/// Deterministic serialization; floats carry 17 significant digits so that
/// parse -> serialize -> parse is field-exact.
std::string serialize_scene(const ArticulatedScene& scene);

ArticulatedScene load_scene_file(const std::string& path, const ParseOptions& options = {});
void save_scene_file(const ArticulatedScene& scene, const std::string& path);

/// Uniform area-weighted sample of the box surface; deterministic in `seed`.
std::vector<Eigen::Vector3d> sample_part_points(const PartGeometry& geometry, std::uint64_t seed);

/// Samples every part at the closed configuration (base parts first).
SampledCloud sample_scene(const ArticulatedScene& scene, std::uint64_t seed);

/// Applies the target joint transform for configuration q to the target-part
/// points of a closed-state cloud; all other points are unchanged. Throws
/// std::domain_error when q lies outside the joint limits.
SampledCloud pose_points(const ArticulatedScene& scene, const SampledCloud& closed, double q);

/// Transform of a single closed-state target-part point to configuration q.
Eigen::Vector3d pose_target_point(const JointSpec& joint, const Eigen::Vector3d& p_closed,
                                  double q);

/// Samples the scene, poses it to q, and drops target points per `occ`.
/// Fully deterministic given occ.seed. All target points dropped yields an
/// observation with an empty mask (callers must handle).
Observation render_observation(const ArticulatedScene& scene, double q, const OcclusionModel& occ);

}  // namespace flowbot
