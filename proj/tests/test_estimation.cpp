#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "flowbot/errors.hpp"
#include "flowbot/estimation.hpp"
#include "flowbot/fields.hpp"
#include "flowbot/predictors.hpp"
#include "flowbot/rng.hpp"
#include "flowbot/scene_gen.hpp"
#include "test_util.hpp"

using namespace flowbot;

namespace {

struct SyntheticRevolute {
  JointSpec joint;
  Observation obs;
  DenseFields fields;
};

// Random revolute axis with points scattered at radii in [0.2, 1.5] and
// exact ground-truth fields.
SyntheticRevolute make_synthetic_revolute(std::uint64_t seed, int n = 60) {
  SplitMix64 rng(seed);
  SyntheticRevolute s;
  s.joint.type = JointType::Revolute;
  s.joint.axis_origin = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
  s.joint.axis_direction =
      Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()).normalized();
  s.joint.limit_lower = 0.0;
  s.joint.limit_upper = 1.0;
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d radial =
        random_perpendicular(rng, s.joint.axis_direction) * rng.uniform(0.2, 1.5);
    const Eigen::Vector3d p =
        s.joint.axis_origin + radial + s.joint.axis_direction * rng.uniform(-1, 1);
    s.obs.points.push_back(p);
    s.obs.mask.push_back(1);
    s.obs.source_part.push_back(0);
    s.obs.source_index.push_back(i);
  }
  s.fields = gt_fields(s.obs, s.joint);
  return s;
}

// Angle between the motion direction implied by an estimate at point p and
// the true instantaneous motion direction there. This measures the whole
// estimate (direction and origin together): an in-plane projection tilt
// leaves the cross-product direction untouched, so the implied motion at the
// contact is the quantity that actually distinguishes corrected estimates.
double motion_direction_error(const Eigen::Vector3d& est_direction,
                              const Eigen::Vector3d& est_origin, const Eigen::Vector3d& p,
                              const JointSpec& joint) {
  const Eigen::Vector3d est_motion = est_direction.cross(p - est_origin);
  const Eigen::Vector3d true_motion =
      joint.axis_direction.cross(p - nearest_point_on_axis(p, joint.axis_origin,
                                                           joint.axis_direction));
  return angle_between(est_motion, true_motion);
}

}  // namespace

TEST_SUITE("estimation") {

TEST_CASE("gram_schmidt_correct removes exactly the flow-parallel component") {
  SUBCASE("orthogonal input is unchanged") {
    const Eigen::Vector3d f(0, 2, 0), r(3, 0, 1);
    const auto result = gram_schmidt_correct(f, r);
    CHECK(result.applied);
    CHECK(result.projection == r);
  }
  SUBCASE("parallel input collapses to zero") {
    const auto result = gram_schmidt_correct({1, 0, 0}, {2.5, 0, 0});
    CHECK(result.applied);
    CHECK(result.projection.norm() <= 1e-15);
  }
  SUBCASE("mixed input keeps only the perpendicular part") {
    const auto result = gram_schmidt_correct({1, 0, 0}, {1, 1, 0});
    CHECK(result.applied);
    check_close(result.projection, {0, 1, 0}, 1e-15, "gs");
  }
  SUBCASE("idempotence") {
    SplitMix64 rng(7);
    for (int i = 0; i < 100; ++i) {
      const Eigen::Vector3d f(rng.normal(), rng.normal(), rng.normal());
      const Eigen::Vector3d r(rng.normal(), rng.normal(), rng.normal());
      const auto once = gram_schmidt_correct(f, r);
      const auto twice = gram_schmidt_correct(f, once.projection);
      CHECK((twice.projection - once.projection).norm() <= 1e-12);
    }
  }
  SUBCASE("tiny flow is flagged and left unchanged") {
    const Eigen::Vector3d r(1, 2, 3);
    const auto result = gram_schmidt_correct({0, 0, 1e-10}, r);
    CHECK_FALSE(result.applied);
    CHECK(result.projection == r);
  }
}

TEST_CASE("pointwise estimate recovers the hand-built axis") {
  // omega = +z through the origin, p = (1,0,0): f = (0,1,0), r = (-1,0,0).
  const auto est = estimate_axis_pointwise({1, 0, 0}, {0, 1, 0}, {-1, 0, 0}, true);
  REQUIRE(est.has_value());
  check_close(est->direction, {0, 0, 1}, 1e-15, "direction (sign-aligned with the flow)");
  check_close(est->origin, {0, 0, 0}, 1e-15, "origin");
  // A forward rotation must move p along f.
  CHECK(est->direction.cross(Eigen::Vector3d(1, 0, 0) - est->origin).dot(
            Eigen::Vector3d(0, 1, 0)) > 0.0);

  SUBCASE("degenerate cross product yields no estimate") {
    CHECK_FALSE(estimate_axis_pointwise({1, 0, 0}, {0, 1, 0}, {0, 2, 0}, true).has_value());
    CHECK_FALSE(estimate_axis_pointwise({1, 0, 0}, {0, 0, 0}, {-1, 0, 0}, true).has_value());
  }
}

TEST_CASE("aggregate_axis recovers random synthetic axes from exact fields") {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    CAPTURE(seed);
    const SyntheticRevolute s = make_synthetic_revolute(seed);
    const AxisEstimate est = aggregate_axis(s.obs, s.fields, JointType::Revolute, true, true);
    CHECK(est.support_count == static_cast<int>(s.obs.points.size()));
    CHECK(std::abs(est.direction.norm() - 1.0) <= 1e-9);
    CHECK(angle_between(est.direction, s.joint.axis_direction) <= 1e-9);
    CHECK(point_to_line_distance(est.origin, s.joint.axis_origin, s.joint.axis_direction) <=
          1e-9);
    // Sign contract: forward rotation moves every supporting point along its
    // own flow.
    for (std::size_t i = 0; i < s.obs.points.size(); ++i) {
      CHECK(est.direction.cross(s.obs.points[i] - est.origin).dot(s.fields.flow[i]) >= 0.0);
    }
  }
}

TEST_CASE("aggregate_axis recovers generated scene axes from exact fields") {
  const auto scenes = make_scene_suite(10, 99, 500);
  for (const ArticulatedScene& scene : scenes) {
    CAPTURE(scene.name);
    const JointSpec& joint = scene.target_joint();
    OcclusionModel occ;
    occ.seed = 17;
    const Observation obs = render_observation(scene, joint.limit_lower, occ);
    const DenseFields fields = gt_fields(obs, joint);
    const AxisEstimate est = aggregate_axis(obs, fields, joint.type, true, true);
    CHECK(angle_between(est.direction, joint.axis_direction) <= 1e-9);
    if (joint.type == JointType::Revolute) {
      CHECK(point_to_line_distance(est.origin, joint.axis_origin, joint.axis_direction) <=
            1e-9);
    } else {
      // Prismatic origin is the support centroid.
      Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
      int count = 0;
      for (std::size_t i = 0; i < obs.points.size(); ++i) {
        if (!obs.mask[i]) continue;
        centroid += obs.points[i];
        ++count;
      }
      check_close(est.origin, centroid / count, 1e-12, "prismatic centroid");
    }
  }
}

TEST_CASE("aggregate direction is invariant to positive projection rescaling") {
  const SyntheticRevolute s = make_synthetic_revolute(321);
  const AxisEstimate base = aggregate_axis(s.obs, s.fields, JointType::Revolute, true, true);
  for (const double tau : {1e-3, 0.1, 7.0, 1e4}) {
    DenseFields scaled = s.fields;
    for (auto& r : scaled.projection) r *= tau;
    const AxisEstimate est = aggregate_axis(s.obs, scaled, JointType::Revolute, true, true);
    CHECK(angle_between(est.direction, base.direction) <= 1e-12);
  }
}

TEST_CASE("unmasked aggregation matches masked aggregation when off-mask fields are zero") {
  const auto scenes = make_scene_suite(4, 5150, 300);
  for (const ArticulatedScene& scene : scenes) {
    CAPTURE(scene.name);
    const JointSpec& joint = scene.target_joint();
    OcclusionModel occ;
    occ.seed = 4;
    const Observation obs = render_observation(scene, joint.limit_lower, occ);
    const DenseFields fields = gt_fields(obs, joint);
    const AxisEstimate masked = aggregate_axis(obs, fields, joint.type, true, true);
    const AxisEstimate unmasked = aggregate_axis(obs, fields, joint.type, true, false);
    CHECK(masked.support_count == unmasked.support_count);
    CHECK(angle_between(masked.direction, unmasked.direction) <= 1e-12);
    CHECK((masked.origin - unmasked.origin).norm() <= 1e-12);
  }
}

TEST_CASE("aggregate_axis raises a degenerate error without usable points") {
  Observation obs;
  obs.points = {{0, 0, 0}, {1, 1, 1}};
  obs.mask = {0, 0};
  obs.source_part = {0, 0};
  obs.source_index = {0, 1};
  DenseFields zero;
  zero.flow.assign(2, Eigen::Vector3d::Zero());
  zero.projection.assign(2, Eigen::Vector3d::Zero());
  zero.mask = {0, 0};
  CHECK_THROWS_AS(aggregate_axis(obs, zero, JointType::Revolute, true, true), DegenerateError);
  CHECK_THROWS_AS(aggregate_axis(obs, zero, JointType::Prismatic, true, true), DegenerateError);
}

TEST_CASE("in-plane projection tilt: corrected estimates keep the true motion direction") {
  // Tilting r_p toward f_p inside their common plane cannot change the
  // direction of r x f, so the benefit of the correction shows up in the
  // estimated origin: without it the implied motion direction at each point
  // is off by exactly the tilt angle, with it the per-point estimate is
  // machine-exact.
  int checked_points = 0;
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    CAPTURE(seed);
    const ArticulatedScene scene = make_door_scene(mix_seed(2024, seed));
    const JointSpec& joint = scene.target_joint();
    OcclusionModel occ;
    occ.seed = seed;
    const Observation obs = render_observation(scene, joint.limit_lower, occ);
    NoiseModel noise;
    noise.proj_bias_deg = 10.0;
    noise.seed = seed;
    const DenseFields noisy = predict_noisy(scene, obs, noise);

    for (std::size_t i = 0; i < obs.points.size(); i += 7) {
      if (!obs.mask[i] || noisy.flow[i].norm() <= 1e-3) continue;
      const auto with_gs =
          estimate_axis_pointwise(obs.points[i], noisy.flow[i], noisy.projection[i], true);
      const auto without_gs =
          estimate_axis_pointwise(obs.points[i], noisy.flow[i], noisy.projection[i], false);
      // Points a hair from the hinge can fall under the degeneracy floor.
      if (!with_gs || !without_gs) continue;
      // Cross-product direction is identical either way.
      CHECK(angle_between(with_gs->direction, without_gs->direction) <= 1e-9);
      const double err_gs =
          motion_direction_error(with_gs->direction, with_gs->origin, obs.points[i], joint);
      const double err_raw = motion_direction_error(without_gs->direction, without_gs->origin,
                                                    obs.points[i], joint);
      CHECK(err_gs <= 1e-9);
      CHECK(err_raw == doctest::Approx(10.0 * kPi / 180.0).epsilon(1e-9));
      ++checked_points;
    }

    // Aggregate estimates ordered the same way at the contact point.
    const AxisEstimate agg_gs = aggregate_axis(obs, noisy, JointType::Revolute, true, true);
    const AxisEstimate agg_raw = aggregate_axis(obs, noisy, JointType::Revolute, false, true);
    int contact = -1;
    double best = -1.0;
    for (std::size_t i = 0; i < obs.points.size(); ++i) {
      if (obs.mask[i] && noisy.flow[i].norm() > best) {
        best = noisy.flow[i].norm();
        contact = static_cast<int>(i);
      }
    }
    REQUIRE(contact >= 0);
    const double agg_err_gs =
        motion_direction_error(agg_gs.direction, agg_gs.origin, obs.points[contact], joint);
    const double agg_err_raw =
        motion_direction_error(agg_raw.direction, agg_raw.origin, obs.points[contact], joint);
    CHECK(agg_err_gs < agg_err_raw);
  }
  CHECK(checked_points > 500);
}

TEST_CASE("with stochastic noise the aggregate beats a single point") {
  std::vector<double> aggregate_errors, pointwise_errors;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ArticulatedScene scene = make_door_scene(mix_seed(77, seed));
    const JointSpec& joint = scene.target_joint();
    OcclusionModel occ;
    occ.seed = seed;
    const Observation obs = render_observation(scene, joint.limit_lower, occ);
    NoiseModel noise;
    noise.flow_sigma = 0.05;
    noise.proj_sigma = 0.05;
    noise.seed = mix_seed(88, seed);
    const DenseFields noisy = predict_noisy(scene, obs, noise);
    const AxisEstimate agg = aggregate_axis(obs, noisy, JointType::Revolute, true, true);
    aggregate_errors.push_back(angle_between(agg.direction, joint.axis_direction));
    for (std::size_t i = 0; i < obs.points.size(); ++i) {
      if (!obs.mask[i] || noisy.flow[i].norm() <= 0.5) continue;
      const auto est =
          estimate_axis_pointwise(obs.points[i], noisy.flow[i], noisy.projection[i], true);
      if (!est) continue;
      pointwise_errors.push_back(line_angle_between(est->direction, joint.axis_direction));
      break;
    }
  }
  REQUIRE(!aggregate_errors.empty());
  REQUIRE(!pointwise_errors.empty());
  const auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  CHECK(median(aggregate_errors) < median(pointwise_errors));
}

TEST_CASE("classifier modes") {
  const auto scenes = make_scene_suite(2, 1234, 600);
  const ArticulatedScene& door = scenes[0];
  const ArticulatedScene& drawer = scenes[1];
  REQUIRE(door.target_joint().type == JointType::Revolute);
  REQUIRE(drawer.target_joint().type == JointType::Prismatic);
  OcclusionModel occ;
  occ.seed = 9;

  SUBCASE("oracle reads the scene") {
    const Observation obs = render_observation(door, door.target_joint().limit_lower, occ);
    const DenseFields fields = gt_fields(obs, door.target_joint());
    CHECK(classify_articulation(door, obs, fields, ClassifierMode::Oracle) ==
          JointType::Revolute);
    CHECK(classify_articulation(drawer, obs, fields, ClassifierMode::Oracle) ==
          JointType::Prismatic);
  }
  SUBCASE("heuristic flags parallel flow as prismatic") {
    const Observation obs =
        render_observation(drawer, drawer.target_joint().limit_lower, occ);
    const DenseFields fields = gt_fields(obs, drawer.target_joint());
    CHECK(classify_articulation(drawer, obs, fields, ClassifierMode::Heuristic) ==
          JointType::Prismatic);
  }
  SUBCASE("heuristic flags spread-out door flow as revolute") {
    const Observation obs = render_observation(door, door.target_joint().limit_lower, occ);
    const DenseFields fields = gt_fields(obs, door.target_joint());
    CHECK(classify_articulation(door, obs, fields, ClassifierMode::Heuristic) ==
          JointType::Revolute);
  }
  SUBCASE("mode parsing") {
    CHECK(classifier_mode_from_string("oracle") == ClassifierMode::Oracle);
    CHECK(classifier_mode_from_string("heuristic") == ClassifierMode::Heuristic);
    CHECK_THROWS_AS(classifier_mode_from_string("psychic"), ParseError);
  }
}

TEST_CASE("axis estimate JSON round-trip") {
  AxisEstimate est;
  est.type = JointType::Revolute;
  est.direction = Eigen::Vector3d(1, 2, 2).normalized();
  est.origin = {0.1, -0.25, 1.0 / 3.0};
  est.support_count = 431;
  const std::string text = axis_estimate_to_json(est);
  const AxisEstimate back = axis_estimate_from_json(text);
  CHECK(back.type == est.type);
  CHECK(back.direction == est.direction);
  CHECK(back.origin == est.origin);
  CHECK(back.support_count == est.support_count);

  CHECK_THROWS_AS(axis_estimate_from_json("{\"type\": \"revolute\"}"), ParseError);
  CHECK_THROWS_AS(axis_estimate_from_json("not json at all"), ParseError);
  CHECK_THROWS_AS(
      axis_estimate_from_json(
          "{\"type\": \"spherical\", \"omega\": [0,0,1], \"origin\": [0,0,0], \"support\": 1}"),
      ParseError);
}

}  // TEST_SUITE("estimation")
