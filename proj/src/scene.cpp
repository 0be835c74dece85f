#include "flowbot/scene.hpp"

#include <algorithm>
#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "flowbot/detail/format.hpp"
#include "flowbot/errors.hpp"
#include "flowbot/rng.hpp"

namespace flowbot {

namespace pt = boost::property_tree;

std::string to_string(JointType type) {
  return type == JointType::Revolute ? "revolute" : "prismatic";
}

JointType joint_type_from_string(const std::string& s) {
  if (s == "revolute") return JointType::Revolute;
  if (s == "prismatic") return JointType::Prismatic;
  throw ParseError("unknown joint type '" + s + "'");
}

// ---------------------------------------------------------------------------
// Scene accessors

const std::string& ArticulatedScene::part_name(int index) const {
  const int nb = static_cast<int>(base_parts.size());
  return index < nb ? base_parts[index].id : child_parts[index - nb].id;
}

const PartGeometry& ArticulatedScene::part_geometry(int index) const {
  const int nb = static_cast<int>(base_parts.size());
  return index < nb ? base_parts[index].geometry : child_parts[index - nb].geometry;
}

bool ArticulatedScene::part_is_target(int index) const {
  return part_name(index) == target_part;
}

int ArticulatedScene::target_part_index() const {
  for (int i = 0; i < part_count(); ++i)
    if (part_is_target(i)) return i;
  throw ParseError("scene '" + name + "': target link '" + target_part + "' not found");
}

const ChildPart& ArticulatedScene::target() const {
  for (const ChildPart& child : child_parts)
    if (child.id == target_part) return child;
  throw ParseError("scene '" + name + "': target link '" + target_part + "' not found");
}

void ArticulatedScene::validate() const {
  std::set<std::string> ids;
  auto check_part = [&](const std::string& id, const PartGeometry& geometry) {
    if (id.empty()) throw ParseError("scene '" + name + "': link with empty name");
    if (!ids.insert(id).second)
      throw ParseError("scene '" + name + "': duplicate link name '" + id + "'");
    if (!(geometry.size.minCoeff() > 0.0))
      throw ParseError("link '" + id + "': box size must be positive");
    if (geometry.sample_count < 1)
      throw ParseError("link '" + id + "': sample_count must be >= 1");
  };
  for (const BasePart& part : base_parts) check_part(part.id, part.geometry);
  for (const ChildPart& part : child_parts) {
    check_part(part.id, part.geometry);
    if (!(part.joint.limit_lower < part.joint.limit_upper))
      throw ParseError("joint of link '" + part.id + "': limit lower must be < upper");
    if (std::abs(part.joint.axis_direction.norm() - 1.0) > 1e-9)
      throw ParseError("joint of link '" + part.id + "': axis is not unit length");
  }
  bool target_found = false;
  for (const ChildPart& part : child_parts) target_found |= (part.id == target_part);
  if (!target_found)
    throw ParseError("scene '" + name + "': target link '" + target_part +
                     "' is not an articulated child link");
}

int Observation::mask_count() const {
  return static_cast<int>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

Eigen::Vector3d parse_triplet(const std::string& text, const std::string& what) {
  std::istringstream in(text);
  std::vector<std::string> tokens;
  std::string token;
  while (in >> token) tokens.push_back(token);
  if (tokens.size() != 3)
    throw ParseError(what + ": expected 3 numbers, got '" + text + "'");
  return {detail::parse_double(tokens[0], what), detail::parse_double(tokens[1], what),
          detail::parse_double(tokens[2], what)};
}

struct ParseContext {
  const ParseOptions& options;

  void unknown(const std::string& element, const std::string& parent) const {
    const std::string message = "unknown element <" + element + "> in <" + parent + ">";
    if (!options.lenient) throw ParseError(message);
    if (options.warnings) options.warnings->push_back(message + " (ignored)");
  }

  void unknown_attr(const std::string& attr, const std::string& element) const {
    const std::string message = "unknown attribute '" + attr + "' on <" + element + ">";
    if (!options.lenient) throw ParseError(message);
    if (options.warnings) options.warnings->push_back(message + " (ignored)");
  }
};

void check_attrs(const ParseContext& ctx, const pt::ptree& node, const std::string& element,
                 std::initializer_list<const char*> allowed) {
  const auto attrs = node.get_child_optional("<xmlattr>");
  if (!attrs) return;
  for (const auto& [key, value] : *attrs) {
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* a) { return key == a; }) == allowed.end())
      ctx.unknown_attr(key, element);
  }
}

std::string require_attr(const pt::ptree& node, const std::string& element,
                         const std::string& attr) {
  const auto value = node.get_optional<std::string>("<xmlattr>." + attr);
  if (!value) throw ParseError("<" + element + ">: missing required attribute '" + attr + "'");
  return *value;
}

PartGeometry parse_link_visual(const ParseContext& ctx, const pt::ptree& link,
                               const std::string& link_name, int sample_count) {
  PartGeometry geometry;
  geometry.sample_count = sample_count;
  const auto visual = link.get_child_optional("visual");
  if (!visual) throw ParseError("link '" + link_name + "': missing <visual>");

  bool have_box = false;
  for (const auto& [key, node] : *visual) {
    if (key == "<xmlattr>") {
      check_attrs(ctx, *visual, "visual", {});
    } else if (key == "origin") {
      check_attrs(ctx, node, "origin", {"xyz"});
      geometry.center =
          parse_triplet(require_attr(node, "origin", "xyz"), "link '" + link_name + "' origin");
    } else if (key == "geometry") {
      check_attrs(ctx, node, "geometry", {});
      for (const auto& [gkey, gnode] : node) {
        if (gkey == "<xmlattr>") continue;
        if (gkey == "box") {
          check_attrs(ctx, gnode, "box", {"size"});
          geometry.size =
              parse_triplet(require_attr(gnode, "box", "size"), "link '" + link_name + "' box size");
          have_box = true;
        } else {
          ctx.unknown(gkey, "geometry");
        }
      }
    } else {
      ctx.unknown(key, "visual");
    }
  }
  if (!have_box) throw ParseError("link '" + link_name + "': missing <geometry><box>");
  if (!(geometry.size.minCoeff() > 0.0))
    throw ParseError("link '" + link_name + "': box size must be positive");
  return geometry;
}

struct RawJoint {
  std::string name;
  JointSpec spec;
  std::string parent;
  std::string child;
};

RawJoint parse_joint(const ParseContext& ctx, const pt::ptree& node) {
  RawJoint joint;
  check_attrs(ctx, node, "joint", {"name", "type"});
  joint.name = require_attr(node, "joint", "name");
  const std::string type = require_attr(node, "joint", "type");
  try {
    joint.spec.type = joint_type_from_string(type);
  } catch (const ParseError&) {
    throw ParseError("joint '" + joint.name + "': unknown joint type '" + type + "'");
  }

  // URDF defaults: origin at zero, axis along +x.
  joint.spec.axis_origin = Eigen::Vector3d::Zero();
  joint.spec.axis_direction = Eigen::Vector3d::UnitX();
  bool have_limit = false;

  for (const auto& [key, sub] : node) {
    if (key == "<xmlattr>") continue;
    if (key == "origin") {
      check_attrs(ctx, sub, "origin", {"xyz"});
      joint.spec.axis_origin =
          parse_triplet(require_attr(sub, "origin", "xyz"), "joint '" + joint.name + "' origin");
    } else if (key == "axis") {
      check_attrs(ctx, sub, "axis", {"xyz"});
      Eigen::Vector3d axis =
          parse_triplet(require_attr(sub, "axis", "xyz"), "joint '" + joint.name + "' axis");
      const double norm = axis.norm();
      if (norm < 1e-12) throw ParseError("joint '" + joint.name + "': zero-length axis");
      // Skip the division when already unit so reparsing serialized output
      // reproduces the stored direction bit-for-bit.
      if (std::abs(norm - 1.0) > 1e-12) axis /= norm;
      joint.spec.axis_direction = axis;
    } else if (key == "limit") {
      check_attrs(ctx, sub, "limit", {"lower", "upper"});
      joint.spec.limit_lower =
          detail::parse_double(require_attr(sub, "limit", "lower"), "joint '" + joint.name + "' limit lower");
      joint.spec.limit_upper =
          detail::parse_double(require_attr(sub, "limit", "upper"), "joint '" + joint.name + "' limit upper");
      have_limit = true;
    } else if (key == "parent") {
      check_attrs(ctx, sub, "parent", {"link"});
      joint.parent = require_attr(sub, "parent", "link");
    } else if (key == "child") {
      check_attrs(ctx, sub, "child", {"link"});
      joint.child = require_attr(sub, "child", "link");
    } else {
      ctx.unknown(key, "joint");
    }
  }

  if (!have_limit)
    throw ParseError("joint '" + joint.name + "': missing limits on a movable joint");
  if (!(joint.spec.limit_lower < joint.spec.limit_upper))
    throw ParseError("joint '" + joint.name + "': limit lower must be < upper");
  if (joint.parent.empty()) throw ParseError("joint '" + joint.name + "': missing <parent>");
  if (joint.child.empty()) throw ParseError("joint '" + joint.name + "': missing <child>");
  return joint;
}

}  // namespace

ArticulatedScene parse_scene(const std::string& text, const ParseOptions& options) {
  const ParseContext ctx{options};
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_xml(in, tree, pt::xml_parser::trim_whitespace | pt::xml_parser::no_comments);
  } catch (const pt::xml_parser_error& e) {
    throw ParseError(std::string("malformed XML: ") + e.what());
  }

  const auto robot = tree.get_child_optional("robot");
  if (!robot) throw ParseError("expected <robot> root element");

  ArticulatedScene scene;
  check_attrs(ctx, *robot, "robot", {"name"});
  scene.name = require_attr(*robot, "robot", "name");

  struct RawLink {
    std::string name;
    PartGeometry geometry;
  };
  std::vector<RawLink> links;
  std::vector<RawJoint> joints;
  std::vector<std::string> targets;

  for (const auto& [key, node] : *robot) {
    if (key == "<xmlattr>") continue;
    if (key == "link") {
      check_attrs(ctx, node, "link", {"name", "sample_count"});
      RawLink link;
      link.name = require_attr(node, "link", "name");
      int sample_count = 2000;
      if (const auto sc = node.get_optional<std::string>("<xmlattr>.sample_count")) {
        sample_count =
            static_cast<int>(detail::parse_long(*sc, "link '" + link.name + "' sample_count"));
        if (sample_count < 1)
          throw ParseError("link '" + link.name + "': sample_count must be >= 1");
      }
      link.geometry = parse_link_visual(ctx, node, link.name, sample_count);
      links.push_back(std::move(link));
    } else if (key == "joint") {
      joints.push_back(parse_joint(ctx, node));
    } else if (key == "target") {
      check_attrs(ctx, node, "target", {"link"});
      targets.push_back(require_attr(node, "target", "link"));
    } else {
      ctx.unknown(key, "robot");
    }
  }

  if (targets.size() != 1)
    throw ParseError("scene '" + scene.name + "': expected exactly one <target>, found " +
                     std::to_string(targets.size()));
  scene.target_part = targets[0];

  auto find_link = [&](const std::string& id) -> const RawLink* {
    for (const RawLink& link : links)
      if (link.name == id) return &link;
    return nullptr;
  };

  std::set<std::string> jointed;
  for (const RawJoint& joint : joints) {
    if (!find_link(joint.child))
      throw ParseError("joint '" + joint.name + "': child link '" + joint.child + "' not found");
    if (!find_link(joint.parent))
      throw ParseError("joint '" + joint.name + "': parent link '" + joint.parent + "' not found");
    if (!jointed.insert(joint.child).second)
      throw ParseError("link '" + joint.child + "': attached to more than one joint");
  }
  for (const RawJoint& joint : joints) {
    if (jointed.count(joint.parent))
      throw ParseError("joint '" + joint.name + "': parent '" + joint.parent +
                       "' is itself jointed (only depth-1 scenes are supported)");
  }

  // Preserve document order within each group: base links first, then
  // children in joint order.
  for (const RawLink& link : links) {
    if (!jointed.count(link.name)) scene.base_parts.push_back({link.name, link.geometry});
  }
  for (const RawJoint& joint : joints) {
    const RawLink* link = find_link(joint.child);
    scene.child_parts.push_back({link->name, link->geometry, joint.spec});
  }

  scene.validate();
  return scene;
}

std::string serialize_scene(const ArticulatedScene& scene) {
  std::ostringstream out;
  out << "<robot name=\"" << scene.name << "\">\n";
  auto write_link = [&](const std::string& id, const PartGeometry& geometry) {
    out << "  <link name=\"" << id << "\" sample_count=\"" << geometry.sample_count << "\">\n"
        << "    <visual>\n"
        << "      <origin xyz=\"" << detail::g17_triplet(geometry.center) << "\"/>\n"
        << "      <geometry>\n"
        << "        <box size=\"" << detail::g17_triplet(geometry.size) << "\"/>\n"
        << "      </geometry>\n"
        << "    </visual>\n"
        << "  </link>\n";
  };
  for (const BasePart& part : scene.base_parts) write_link(part.id, part.geometry);
  for (const ChildPart& part : scene.child_parts) write_link(part.id, part.geometry);

  const std::string parent = scene.base_parts.empty() ? "world" : scene.base_parts[0].id;
  for (const ChildPart& part : scene.child_parts) {
    out << "  <joint name=\"" << part.id << "_joint\" type=\"" << to_string(part.joint.type)
        << "\">\n"
        << "    <parent link=\"" << parent << "\"/>\n"
        << "    <child link=\"" << part.id << "\"/>\n"
        << "    <origin xyz=\"" << detail::g17_triplet(part.joint.axis_origin) << "\"/>\n"
        << "    <axis xyz=\"" << detail::g17_triplet(part.joint.axis_direction) << "\"/>\n"
        << "    <limit lower=\"" << detail::g17(part.joint.limit_lower) << "\" upper=\""
        << detail::g17(part.joint.limit_upper) << "\"/>\n"
        << "  </joint>\n";
  }
  out << "  <target link=\"" << scene.target_part << "\"/>\n";
  out << "</robot>\n";
  return out.str();
}

ArticulatedScene load_scene_file(const std::string& path, const ParseOptions& options) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scene file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_scene(buffer.str(), options);
}

void save_scene_file(const ArticulatedScene& scene, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write scene file '" + path + "'");
  out << serialize_scene(scene);
  if (!out) throw IoError("failed while writing '" + path + "'");
}

// ---------------------------------------------------------------------------
// Sampling / posing / rendering

std::vector<Eigen::Vector3d> sample_part_points(const PartGeometry& geometry, std::uint64_t seed) {
  SplitMix64 rng(seed);
  const Eigen::Vector3d h = 0.5 * geometry.size;
  // Face order: +x, -x, +y, -y, +z, -z, weighted by area.
  const double area_x = geometry.size.y() * geometry.size.z();
  const double area_y = geometry.size.x() * geometry.size.z();
  const double area_z = geometry.size.x() * geometry.size.y();
  const double areas[6] = {area_x, area_x, area_y, area_y, area_z, area_z};
  double cumulative[6];
  double total = 0.0;
  for (int f = 0; f < 6; ++f) cumulative[f] = (total += areas[f]);

  std::vector<Eigen::Vector3d> points;
  points.reserve(geometry.sample_count);
  for (int i = 0; i < geometry.sample_count; ++i) {
    const double pick = rng.uniform01() * total;
    int face = 0;
    while (face < 5 && pick >= cumulative[face]) ++face;
    const double u = rng.uniform01() - 0.5;
    const double v = rng.uniform01() - 0.5;
    Eigen::Vector3d p = geometry.center;
    switch (face) {
      case 0: p += Eigen::Vector3d(h.x(), u * geometry.size.y(), v * geometry.size.z()); break;
      case 1: p += Eigen::Vector3d(-h.x(), u * geometry.size.y(), v * geometry.size.z()); break;
      case 2: p += Eigen::Vector3d(u * geometry.size.x(), h.y(), v * geometry.size.z()); break;
      case 3: p += Eigen::Vector3d(u * geometry.size.x(), -h.y(), v * geometry.size.z()); break;
      case 4: p += Eigen::Vector3d(u * geometry.size.x(), v * geometry.size.y(), h.z()); break;
      default: p += Eigen::Vector3d(u * geometry.size.x(), v * geometry.size.y(), -h.z()); break;
    }
    points.push_back(p);
  }
  return points;
}

SampledCloud sample_scene(const ArticulatedScene& scene, std::uint64_t seed) {
  SampledCloud cloud;
  for (int part = 0; part < scene.part_count(); ++part) {
    const PartGeometry& geometry = scene.part_geometry(part);
    std::vector<Eigen::Vector3d> points =
        sample_part_points(geometry, mix_seed(seed, static_cast<std::uint64_t>(part) + 1));
    for (int i = 0; i < static_cast<int>(points.size()); ++i) {
      cloud.points.push_back(points[i]);
      cloud.source_part.push_back(part);
      cloud.source_index.push_back(i);
    }
  }
  return cloud;
}

Eigen::Vector3d pose_target_point(const JointSpec& joint, const Eigen::Vector3d& p_closed,
                                  double q) {
  const double travel = q - joint.limit_lower;
  if (joint.type == JointType::Prismatic) return p_closed + travel * joint.axis_direction;
  // Rodrigues rotation of the vector about (axis_origin, axis_direction).
  const Eigen::Vector3d& k = joint.axis_direction;
  const Eigen::Vector3d u = p_closed - joint.axis_origin;
  const double c = std::cos(travel);
  const double s = std::sin(travel);
  return joint.axis_origin + u * c + k.cross(u) * s + k * (k.dot(u)) * (1.0 - c);
}

SampledCloud pose_points(const ArticulatedScene& scene, const SampledCloud& closed, double q) {
  const JointSpec& joint = scene.target_joint();
  if (q < joint.limit_lower || q > joint.limit_upper)
    throw std::domain_error("configuration q=" + std::to_string(q) + " outside joint limits [" +
                            std::to_string(joint.limit_lower) + ", " +
                            std::to_string(joint.limit_upper) + "]");
  const int target = scene.target_part_index();
  SampledCloud posed = closed;
  for (std::size_t i = 0; i < posed.points.size(); ++i) {
    if (posed.source_part[i] == target)
      posed.points[i] = pose_target_point(joint, closed.points[i], q);
  }
  return posed;
}

Observation render_observation(const ArticulatedScene& scene, double q,
                               const OcclusionModel& occ) {
  const JointSpec& joint = scene.target_joint();
  const SampledCloud closed = sample_scene(scene, mix_seed(occ.seed, 1));
  const SampledCloud posed = pose_points(scene, closed, q);
  const int target = scene.target_part_index();

  const double opening =
      joint.range() > 0.0 ? (q - joint.limit_lower) / joint.range() : 0.0;
  const double dropout =
      std::clamp(occ.base_dropout + occ.opening_coupled_dropout * opening, 0.0, 1.0);

  SplitMix64 drop_rng(mix_seed(occ.seed, 2));
  Observation obs;
  obs.config_q = q;
  for (std::size_t i = 0; i < posed.points.size(); ++i) {
    const bool is_target = posed.source_part[i] == target;
    if (is_target && drop_rng.uniform01() < dropout) continue;
    obs.points.push_back(posed.points[i]);
    obs.mask.push_back(is_target ? 1 : 0);
    obs.source_part.push_back(posed.source_part[i]);
    obs.source_index.push_back(posed.source_index[i]);
  }
  return obs;
}

}  // namespace flowbot
