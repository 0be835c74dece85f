#include "flowbot/predictors.hpp"

#include <cmath>

#include "flowbot/errors.hpp"
#include "flowbot/rng.hpp"

namespace flowbot {

DenseFields predict_exact(const ArticulatedScene& scene, const Observation& obs) {
  if (obs.mask_count() == 0) {
    DenseFields fields;
    fields.flow.assign(obs.points.size(), Eigen::Vector3d::Zero());
    fields.projection.assign(obs.points.size(), Eigen::Vector3d::Zero());
    fields.mask = obs.mask;
    return fields;
  }
  return gt_fields(obs, scene.target_joint());
}

namespace {

/// Rotation of v by `angle` about unit `axis` (vector form of the Rodrigues
/// formula; avoids building a matrix in the per-point loop).
Eigen::Vector3d rotate_about(const Eigen::Vector3d& v, const Eigen::Vector3d& axis,
                             double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return v * c + axis.cross(v) * s + axis * axis.dot(v) * (1.0 - c);
}

}  // namespace

DenseFields predict_noisy(const ArticulatedScene& scene, const Observation& obs,
                          const NoiseModel& noise) {
  DenseFields fields = predict_exact(scene, obs);
  const double bias = noise.proj_bias_deg * M_PI / 180.0;

  for (std::size_t i = 0; i < obs.points.size(); ++i) {
    if (!fields.mask[i]) continue;
    SplitMix64 rng(mix_seed(noise.seed, i));
    // Fixed draw order per point keeps streams stable across parameter
    // choices: flow angle, flow axis, projection scale.
    const double flow_angle = std::abs(rng.normal()) * noise.flow_sigma;
    const double proj_scale = 1.0 + rng.normal() * noise.proj_sigma;

    Eigen::Vector3d& f = fields.flow[i];
    Eigen::Vector3d& r = fields.projection[i];
    const Eigen::Vector3d f_true = f;

    if (f_true.norm() > 1e-12) {
      const Eigen::Vector3d tilt_axis = random_perpendicular(rng, f_true);
      if (flow_angle != 0.0) f = rotate_about(f_true, tilt_axis, flow_angle);
    }

    r *= proj_scale;
    // Systematic tilt toward the (pre-noise) flow, within their common plane.
    if (bias != 0.0 && f_true.norm() > 1e-12 && r.norm() > 1e-12) {
      const Eigen::Vector3d r_hat = r.normalized();
      const Eigen::Vector3d in_plane = f_true - f_true.dot(r_hat) * r_hat;
      if (in_plane.norm() > 1e-12) {
        const Eigen::Vector3d toward_flow = in_plane.normalized();
        r = r.norm() * (std::cos(bias) * r_hat + std::sin(bias) * toward_flow);
      }
    }
  }
  return fields;
}

DenseFields predict_replay(const std::string& path) { return read_fields_csv(path).fields; }

DenseFields predict(const PredictorSpec& spec, const ArticulatedScene& scene,
                    const Observation& obs, std::uint64_t stream) {
  if (spec.kind == PredictorSpec::Kind::Exact) return predict_exact(scene, obs);
  NoiseModel noise = spec.noise;
  noise.seed = mix_seed(noise.seed, stream);
  return predict_noisy(scene, obs, noise);
}

}  // namespace flowbot
