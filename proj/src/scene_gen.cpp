#include "flowbot/scene_gen.hpp"

#include <cmath>
#include <cstdio>

#include "flowbot/rng.hpp"

namespace flowbot {

ArticulatedScene make_door_scene(const std::string& name, std::uint64_t seed, int sample_count) {
  SplitMix64 rng(seed);
  const double width = rng.uniform(0.5, 1.0);
  const double height = rng.uniform(0.8, 1.6);
  const double thickness = 0.04;

  const double base_w = width + rng.uniform(0.05, 0.3);
  const double base_d = rng.uniform(0.3, 0.6);
  const double base_h = height + rng.uniform(0.1, 0.4);
  const Eigen::Vector3d base_center(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3),
                                    base_h / 2.0 + rng.uniform(-0.1, 0.1));

  // Door panel flush against the base front face (front = -y side).
  const double cx = base_center.x() + rng.uniform(-1.0, 1.0) * (base_w - width) / 2.0;
  const double cy = base_center.y() - base_d / 2.0 - thickness / 2.0;
  const double cz =
      base_center.z() - base_h / 2.0 + height / 2.0 + rng.uniform(0.0, base_h - height);

  ArticulatedScene scene;
  scene.name = name;
  scene.base_parts.push_back(
      {"base", {base_center, {base_w, base_d, base_h}, sample_count}});

  ChildPart door;
  door.id = "door";
  door.geometry = {{cx, cy, cz}, {width, thickness, height}, sample_count};
  door.joint.type = JointType::Revolute;
  door.joint.limit_lower = 0.0;
  door.joint.limit_upper = rng.uniform(M_PI / 2.0, M_PI);

  // Hinge on one of the four door edges, signed so +q opens outward (-y).
  switch (rng.uniform_index(4)) {
    case 0:  // left edge
      door.joint.axis_origin = {cx - width / 2.0, cy, cz};
      door.joint.axis_direction = {0.0, 0.0, -1.0};
      break;
    case 1:  // right edge
      door.joint.axis_origin = {cx + width / 2.0, cy, cz};
      door.joint.axis_direction = {0.0, 0.0, 1.0};
      break;
    case 2:  // bottom edge
      door.joint.axis_origin = {cx, cy, cz - height / 2.0};
      door.joint.axis_direction = {1.0, 0.0, 0.0};
      break;
    default:  // top edge
      door.joint.axis_origin = {cx, cy, cz + height / 2.0};
      door.joint.axis_direction = {-1.0, 0.0, 0.0};
      break;
  }

  scene.child_parts.push_back(std::move(door));
  scene.target_part = "door";
  scene.validate();
  return scene;
}

ArticulatedScene make_drawer_scene(const std::string& name, std::uint64_t seed,
                                   int sample_count) {
  SplitMix64 rng(seed);
  const double width = rng.uniform(0.3, 0.8);
  const double height = rng.uniform(0.12, 0.3);
  const double depth = rng.uniform(0.25, 0.5);

  const double base_w = width + rng.uniform(0.1, 0.4);
  const double base_d = depth + rng.uniform(0.05, 0.2);
  const double base_h = height + rng.uniform(0.2, 0.8);
  const Eigen::Vector3d base_center(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3),
                                    base_h / 2.0 + rng.uniform(-0.1, 0.1));

  // Drawer nested in the base with its front flush with the base front.
  const double cx = base_center.x() + rng.uniform(-1.0, 1.0) * (base_w - width) / 2.0;
  const double cy = base_center.y() - base_d / 2.0 + depth / 2.0;
  const double cz =
      base_center.z() - base_h / 2.0 + height / 2.0 + rng.uniform(0.0, base_h - height);

  ArticulatedScene scene;
  scene.name = name;
  scene.base_parts.push_back(
      {"base", {base_center, {base_w, base_d, base_h}, sample_count}});

  ChildPart drawer;
  drawer.id = "drawer";
  drawer.geometry = {{cx, cy, cz}, {width, depth, height}, sample_count};
  drawer.joint.type = JointType::Prismatic;
  drawer.joint.axis_direction = {0.0, -1.0, 0.0};  // pulls out of the front
  drawer.joint.axis_origin = {cx, cy, cz};
  drawer.joint.limit_lower = 0.0;
  drawer.joint.limit_upper = rng.uniform(0.2, 0.5);

  scene.child_parts.push_back(std::move(drawer));
  scene.target_part = "drawer";
  scene.validate();
  return scene;
}

std::vector<ArticulatedScene> make_scene_suite(int count, std::uint64_t seed, int sample_count) {
  std::vector<ArticulatedScene> scenes;
  scenes.reserve(count);
  for (int i = 0; i < count; ++i) {
    char name[64];
    const bool door = (i % 2) == 0;
    std::snprintf(name, sizeof(name), "scene_%03d_%s", i, door ? "door" : "drawer");
    const std::uint64_t scene_seed = mix_seed(seed, static_cast<std::uint64_t>(i));
    scenes.push_back(door ? make_door_scene(name, scene_seed, sample_count)
                          : make_drawer_scene(name, scene_seed, sample_count));
  }
  return scenes;
}

}  // namespace flowbot
