#pragma once

#include <cstdint>
#include <string>

#include "flowbot/fields.hpp"
#include "flowbot/scene.hpp"

namespace flowbot {

/// Perturbation model for the noisy predictor. Every masked point is
/// perturbed independently from its own substream of `seed`:
///  - the flow is rotated by |N(0, flow_sigma)| radians about a uniformly
///    random axis perpendicular to it;
///  - the projection is scaled by (1 + N(0, proj_sigma)) and tilted by
///    proj_bias_deg degrees within the (r_p, f_p) plane toward the flow.
struct NoiseModel {
  double flow_sigma = 0.0;     // radians
  double proj_sigma = 0.0;     // relative magnitude
  double proj_bias_deg = 0.0;  // degrees, systematic in-plane tilt
  std::uint64_t seed = 0;
};

/// Ground-truth fields for the scene's target joint; an empty-mask
/// observation yields all-zero fields instead of an error.
DenseFields predict_exact(const ArticulatedScene& scene, const Observation& obs);

/// Exact fields plus the NoiseModel perturbations. Off-mask zeros and the
/// mask itself are preserved; all parameters zero reproduces predict_exact
/// bit for bit.
DenseFields predict_noisy(const ArticulatedScene& scene, const Observation& obs,
                          const NoiseModel& noise);

/// Replays a fields CSV written earlier; validates the format strictly.
DenseFields predict_replay(const std::string& path);

/// Value-typed predictor selector used by the rollout loop and the CLI.
struct PredictorSpec {
  enum class Kind { Exact, Noisy };
  Kind kind = Kind::Exact;
  NoiseModel noise;
  std::string label = "exact";
};

/// Dispatches on PredictorSpec::kind; `stream` is folded into the noise seed so each
/// replanning step draws fresh noise.
DenseFields predict(const PredictorSpec& spec, const ArticulatedScene& scene,
                    const Observation& obs, std::uint64_t stream);

}  // namespace flowbot
