#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "flowbot/errors.hpp"
#include "flowbot/fields.hpp"
#include "flowbot/rng.hpp"
#include "flowbot/scene_gen.hpp"
#include "test_util.hpp"

using namespace flowbot;

namespace {

Observation observation_from_points(std::vector<Eigen::Vector3d> points,
                                    std::vector<std::uint8_t> mask, double q = 0.0) {
  Observation obs;
  obs.points = std::move(points);
  obs.mask = std::move(mask);
  obs.source_part.assign(obs.points.size(), 0);
  obs.source_index.resize(obs.points.size());
  for (std::size_t i = 0; i < obs.points.size(); ++i) obs.source_index[i] = static_cast<int>(i);
  obs.config_q = q;
  return obs;
}

std::filesystem::path temp_csv(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_SUITE("fields") {

TEST_CASE("prismatic flow is the unit axis on the mask and zero elsewhere") {
  JointSpec joint;
  joint.type = JointType::Prismatic;
  joint.axis_direction = Eigen::Vector3d(0, -1, 0);
  const Observation obs =
      observation_from_points({{0, 0, 0}, {1, 2, 3}, {4, 5, 6}}, {1, 0, 1});
  const auto flow = gt_articulation_flow(obs, joint);
  CHECK(flow[0] == Eigen::Vector3d(0, -1, 0));
  CHECK(flow[1] == Eigen::Vector3d(0, 0, 0));
  CHECK(flow[2] == Eigen::Vector3d(0, -1, 0));
}

TEST_CASE("revolute flow normalization and on-axis zeros") {
  JointSpec joint;  // z axis through the origin
  const Observation obs = observation_from_points(
      {{1, 0, 0}, {2, 0, 0}, {0, 0, 1.5}, {9, 9, 9}}, {1, 1, 1, 0});
  const auto flow = gt_articulation_flow(obs, joint);
  // Farthest masked point has magnitude 1; closer ones scale linearly.
  check_close(flow[1], {0, 1, 0}, 1e-15, "farthest point");
  check_close(flow[0], {0, 0.5, 0}, 1e-15, "half radius");
  CHECK(flow[2] == Eigen::Vector3d(0, 0, 0));  // exactly on the axis
  CHECK(flow[3] == Eigen::Vector3d(0, 0, 0));  // off mask
}

TEST_CASE("revolute flow requires a usable mask") {
  JointSpec joint;
  SUBCASE("empty mask") {
    const Observation obs = observation_from_points({{1, 0, 0}}, {0});
    CHECK_THROWS_AS(gt_articulation_flow(obs, joint), DegenerateError);
  }
  SUBCASE("all masked points on the axis") {
    const Observation obs = observation_from_points({{0, 0, 1}, {0, 0, -2}}, {1, 1});
    CHECK_THROWS_AS(gt_articulation_flow(obs, joint), DegenerateError);
  }
}

TEST_CASE("projection points from p to the nearest axis point") {
  JointSpec joint;  // z axis through the origin
  const Observation obs = observation_from_points({{1, 0, 2}, {0, 0, 3}, {5, 5, 5}}, {1, 1, 0});
  const auto projection = gt_articulation_projection(obs, joint);
  check_close(projection[0], {-1, 0, 0}, 0.0, "unit offset");
  CHECK(projection[1] == Eigen::Vector3d(0, 0, 0));  // on the axis
  CHECK(projection[2] == Eigen::Vector3d(0, 0, 0));  // off mask

  // Closed-form nearest-point oracle on random axes.
  SplitMix64 rng(31337);
  for (int trial = 0; trial < 200; ++trial) {
    JointSpec random_joint;
    random_joint.axis_origin = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
    random_joint.axis_direction =
        Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()).normalized();
    const Eigen::Vector3d p(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3));
    const Eigen::Vector3d nearest =
        nearest_point_on_axis(p, random_joint.axis_origin, random_joint.axis_direction);
    // The residual must be perpendicular to the axis and the nearest point on it.
    CHECK(std::abs((p - nearest).dot(random_joint.axis_direction)) <= 1e-12);
    CHECK(point_to_line_distance(nearest, random_joint.axis_origin,
                                 random_joint.axis_direction) <= 1e-12);
    const Observation one = observation_from_points({p}, {1});
    const auto r = gt_articulation_projection(one, random_joint);
    check_close(r[0], nearest - p, 1e-12, "r_p = nearest - p");
  }
}

TEST_CASE("field invariants hold on generated scenes") {
  const auto scenes = make_scene_suite(8, 2718, 300);
  SplitMix64 rng(55);
  for (const ArticulatedScene& scene : scenes) {
    CAPTURE(scene.name);
    const JointSpec& joint = scene.target_joint();
    OcclusionModel occ;
    occ.seed = rng.next();
    const double q = rng.uniform(joint.limit_lower, joint.limit_upper);
    const Observation obs = render_observation(scene, q, occ);
    const DenseFields fields = gt_fields(obs, joint);

    double max_norm = 0.0;
    for (std::size_t i = 0; i < obs.points.size(); ++i) {
      if (!obs.mask[i]) {
        CHECK(fields.flow[i] == Eigen::Vector3d(0, 0, 0));
        CHECK(fields.projection[i] == Eigen::Vector3d(0, 0, 0));
        continue;
      }
      max_norm = std::max(max_norm, fields.flow[i].norm());
      CHECK(fields.flow[i].norm() <= 1.0 + 1e-12);
      // Flow is perpendicular to the projection everywhere.
      CHECK(std::abs(fields.flow[i].dot(fields.projection[i])) <=
            1e-9 * std::max(1.0, fields.projection[i].norm()));
      if (joint.type == JointType::Revolute) {
        // Tangential motion: perpendicular to the rotation axis.
        CHECK(std::abs(fields.flow[i].dot(joint.axis_direction)) <= 1e-9);
      } else {
        // Translational motion: every flow vector is the unit axis itself.
        check_close(fields.flow[i], joint.axis_direction.normalized(), 1e-12, "prismatic flow");
      }
      if (joint.type == JointType::Revolute && fields.flow[i].norm() > 1e-6 &&
          fields.projection[i].norm() > 1e-6) {
        // Cross-consistency: r x f reproduces the axis direction (up to sign).
        const Eigen::Vector3d axis = fields.projection[i].cross(fields.flow[i]).normalized();
        CHECK(line_angle_between(axis, joint.axis_direction) <= 1e-9);
      }
    }
    if (joint.type == JointType::Revolute) CHECK(max_norm == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("flow matches the finite-difference displacement of pose_points") {
  // The flow field is the normalized instantaneous motion under +dq, so a
  // small forward difference of the posing transform must agree in direction
  // and in relative magnitude across points.
  const auto scenes = make_scene_suite(10, 424242, 400);
  SplitMix64 rng(88);
  const double delta = 1e-6;
  for (const ArticulatedScene& scene : scenes) {
    CAPTURE(scene.name);
    const JointSpec& joint = scene.target_joint();
    const SampledCloud closed = sample_scene(scene, rng.next());
    const double q =
        rng.uniform(joint.limit_lower, joint.limit_upper - 2 * delta);
    const SampledCloud at_q = pose_points(scene, closed, q);
    const SampledCloud at_qd = pose_points(scene, closed, q + delta);

    Observation obs;
    obs.points = at_q.points;
    obs.config_q = q;
    const int target = scene.target_part_index();
    for (const int part : at_q.source_part) obs.mask.push_back(part == target ? 1 : 0);
    obs.source_part = at_q.source_part;
    obs.source_index = at_q.source_index;
    const auto flow = gt_articulation_flow(obs, joint);

    double fd_max = 0.0;
    std::vector<Eigen::Vector3d> fd(obs.points.size(), Eigen::Vector3d::Zero());
    for (std::size_t i = 0; i < obs.points.size(); ++i) {
      if (!obs.mask[i]) continue;
      fd[i] = at_qd.points[i] - at_q.points[i];
      fd_max = std::max(fd_max, fd[i].norm());
    }
    REQUIRE(fd_max > 0.0);
    for (std::size_t i = 0; i < obs.points.size(); ++i) {
      if (!obs.mask[i]) continue;
      fd[i] /= fd_max;
      if (fd[i].norm() < 1e-9) {
        CHECK(flow[i].norm() <= 1e-9);
        continue;
      }
      const double cosine = fd[i].normalized().dot(flow[i].normalized());
      CHECK(cosine >= 1.0 - 1e-8);
      const double rel = std::abs(fd[i].norm() - flow[i].norm()) / fd[i].norm();
      CHECK(rel <= 1e-6);
    }
  }
}

TEST_CASE("field_error is the mean squared concatenated deviation") {
  JointSpec joint;
  const Observation obs =
      observation_from_points({{1, 0, 0}, {0.5, 0, 0}, {0.25, 0, 1}}, {1, 1, 1});
  const DenseFields truth = gt_fields(obs, joint);

  SUBCASE("identical fields give zero") { CHECK(field_error(truth, truth) == 0.0); }

  SUBCASE("constant unit offset on every point gives exactly one") {
    DenseFields shifted = truth;
    for (auto& f : shifted.flow) f.x() += 1.0;
    CHECK(field_error(shifted, truth) == doctest::Approx(1.0).epsilon(1e-15));
  }

  SUBCASE("hand-computed three-point value") {
    DenseFields predicted = truth;
    predicted.flow[0] += Eigen::Vector3d(0.1, 0, 0);     // ||.||^2 = 0.01
    predicted.projection[1] += Eigen::Vector3d(0, 0.2, 0);  // 0.04
    predicted.flow[2] += Eigen::Vector3d(0, 0, 0.2);     // 0.04
    predicted.projection[2] += Eigen::Vector3d(0.3, 0, 0);  // 0.09
    const double expected = (0.01 + 0.04 + 0.04 + 0.09) / 3.0;
    CHECK(field_error(predicted, truth) == doctest::Approx(expected).epsilon(1e-12));
  }

  SUBCASE("length mismatch throws") {
    DenseFields short_fields = truth;
    short_fields.flow.pop_back();
    CHECK_THROWS_AS(field_error(short_fields, truth), std::invalid_argument);
  }
}

TEST_CASE("fields CSV round-trips exactly and validates strictly") {
  JointSpec joint;
  const Observation obs = observation_from_points(
      {{1.0 / 3.0, -0.1234567890123456789, 2}, {0.5, 0.25, -1e-17}, {2, 0, 0.1}}, {1, 0, 1});
  const DenseFields fields = gt_fields(obs, joint);
  const auto path = temp_csv("flowbot_fields_roundtrip.csv");
  write_fields_csv(obs, fields, path.string());

  const LoadedFields loaded = read_fields_csv(path.string());
  REQUIRE(loaded.points.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(loaded.points[i] == obs.points[i]);
    CHECK(loaded.fields.flow[i] == fields.flow[i]);
    CHECK(loaded.fields.projection[i] == fields.projection[i]);
    CHECK(loaded.fields.mask[i] == fields.mask[i]);
  }

  SUBCASE("bad header names the expectation") {
    const auto bad = temp_csv("flowbot_fields_bad_header.csv");
    {
      std::FILE* f = std::fopen(bad.string().c_str(), "w");
      std::fputs("idx,x,y,z\n0,1,2,3\n", f);
      std::fclose(f);
    }
    CHECK_THROWS_WITH_AS(read_fields_csv(bad.string()),
                         doctest::Contains("bad header"), ParseError);
  }
  SUBCASE("errors carry the row number") {
    const auto bad = temp_csv("flowbot_fields_bad_row.csv");
    {
      std::FILE* f = std::fopen(bad.string().c_str(), "w");
      std::fputs(kFieldsCsvHeader, f);
      std::fputs("\n0,0,0,0,1,0,0,0,0,0,1\n1,oops,0,0,1,0,0,0,0,0,1\n", f);
      std::fclose(f);
    }
    CHECK_THROWS_WITH_AS(read_fields_csv(bad.string()), doctest::Contains("row 1"), ParseError);
  }
  SUBCASE("idx out of sequence") {
    const auto bad = temp_csv("flowbot_fields_bad_idx.csv");
    {
      std::FILE* f = std::fopen(bad.string().c_str(), "w");
      std::fputs(kFieldsCsvHeader, f);
      std::fputs("\n1,0,0,0,1,0,0,0,0,0,1\n", f);
      std::fclose(f);
    }
    CHECK_THROWS_WITH_AS(read_fields_csv(bad.string()),
                         doctest::Contains("out of sequence"), ParseError);
  }
  SUBCASE("missing file is an I/O error") {
    CHECK_THROWS_AS(read_fields_csv("/nonexistent/fields.csv"), IoError);
  }
}

}  // TEST_SUITE("fields")
