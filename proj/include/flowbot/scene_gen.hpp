#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowbot/scene.hpp"

namespace flowbot {

/// Cabinet with a door hinged on a random edge (left/right/top/bottom); the
/// axis sign is chosen so +q swings the door outward. Limits [0, U] with
/// U ~ U[pi/2, pi].
ArticulatedScene make_door_scene(const std::string& name, std::uint64_t seed,
                                 int sample_count = 2000);

/// Cabinet with a drawer that pulls straight out of the front face. Limits
/// [0, L] with L ~ U[0.2, 0.5] m.
ArticulatedScene make_drawer_scene(const std::string& name, std::uint64_t seed,
                                   int sample_count = 2000);

inline ArticulatedScene make_door_scene(std::uint64_t seed, int sample_count = 2000) {
  return make_door_scene("door", seed, sample_count);
}
inline ArticulatedScene make_drawer_scene(std::uint64_t seed, int sample_count = 2000) {
  return make_drawer_scene("drawer", seed, sample_count);
}

/// Deterministic suite alternating door (even index) and drawer (odd index)
/// scenes, named scene_###_door / scene_###_drawer.
std::vector<ArticulatedScene> make_scene_suite(int count, std::uint64_t seed,
                                               int sample_count = 2000);

}  // namespace flowbot
