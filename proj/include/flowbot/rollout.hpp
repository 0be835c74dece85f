#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "flowbot/estimation.hpp"
#include "flowbot/predictors.hpp"
#include "flowbot/scene.hpp"

namespace flowbot {

enum class PolicyKind { FlowBotPP, AfOnly, NoMpc };

std::string to_string(PolicyKind kind);
PolicyKind policy_kind_from_string(const std::string& s);

/// Success threshold on the normalized distance to the goal configuration.
inline constexpr double kSuccessThreshold = 0.1;

struct PolicyParams {
  PolicyKind policy = PolicyKind::FlowBotPP;
  int horizon = 7;          // H: waypoints executed per replan (flowbotpp)
  int waypoint_count = 20;  // K: waypoints per plan
  int max_steps = 100;
  bool use_gs = true;
  bool use_mask = true;
  ClassifierMode classifier = ClassifierMode::Oracle;
  /// Plans target the remaining travel plus this fraction of the full range,
  /// so a plan can always push the part through the fully-open limit.
  double goal_margin = 0.1;

  /// Stable signature used for seed derivation and CSV labels.
  std::string signature() const;
};

/// Kinematic world: the joint configuration plus a suction contact that
/// tracks the target part rigidly.
struct WorldState {
  const ArticulatedScene* scene = nullptr;
  double q = 0.0;
  bool attached = false;
  int contact_part = -1;
  int contact_sample = -1;
  Eigen::Vector3d contact_closed = Eigen::Vector3d::Zero();  // closed-state position

  /// Contact position at the current configuration.
  Eigen::Vector3d contact_position() const;
};

/// Index of the masked point with the largest flow magnitude (lowest index
/// wins ties). Throws DegenerateError when the mask is empty.
int select_contact(const Observation& obs, const std::vector<Eigen::Vector3d>& flow);

/// Advances the joint toward `target`: the commanded displacement is
/// projected onto the part's one-dimensional motion (signed angle about the
/// true axis for revolute, signed travel along it for prismatic) and q is
/// clamped to the limits. Returns the applied increment.
double step_world(WorldState& world, const Eigen::Vector3d& target);

struct RolloutResult {
  std::vector<double> q_trace;                 // q_0 .. q_end (initial included)
  std::vector<double> step_increments;         // applied dq per executed step
  std::vector<Eigen::Vector3d> contact_trace;  // contact position per trace entry
  int contact_index = -1;                      // point index in the first observation
  double q_init = 0.0;
  double q_goal = 0.0;
  double q_end = 0.0;
  double normalized_distance = 1.0;
  bool success = false;
  int steps_executed = 0;
  int replan_count = 0;
};

double dq_variance(const RolloutResult& result);
double opening_fraction(const RolloutResult& result);

/// Runs one closed-loop manipulation episode from the closed configuration:
/// classify once, pick the max-flow contact, then alternate re-observation,
/// re-prediction, axis aggregation, planning, and execution of the next H
/// waypoints until the part is open or a termination rule fires.
RolloutResult run_policy(const ArticulatedScene& scene, const PredictorSpec& predictor,
                         const OcclusionModel& occ, const PolicyParams& params);

struct TrialRecord {
  std::string scene;
  std::string policy;
  int horizon = 0;
  bool use_gs = true;
  bool use_mask = true;
  std::string noise_label;
  int trial = 0;
  std::uint64_t seed = 0;
  RolloutResult result;
  double wall_ms = 0.0;
};

struct EvalAggregate {
  std::string policy;
  int horizon = 0;
  bool use_gs = true;
  bool use_mask = true;
  std::string noise_label;
  int trials = 0;
  double mean_normalized_distance = 0.0;
  double success_rate = 0.0;
  double mean_dq_variance = 0.0;
  double mean_opening_fraction = 0.0;
  double mean_wall_ms = 0.0;
};

struct EvalReport {
  std::vector<TrialRecord> trials;
  std::vector<EvalAggregate> aggregates;  // one per grid entry
};

/// Full evaluation sweep. Each (scene, params, trial) triple derives its own
/// seed from base_seed, so every rollout is reproducible in isolation.
EvalReport evaluate(const std::vector<ArticulatedScene>& scenes, const PredictorSpec& predictor,
                    const OcclusionModel& occ, const std::vector<PolicyParams>& grid, int trials,
                    std::uint64_t base_seed);

inline constexpr const char* kMetricsCsvHeader =
    "scene,policy,H,use_gs,use_mask,noise_preset,trial,seed,norm_dist,success,steps,replans,"
    "dq_var,wall_ms";
inline constexpr const char* kSummaryCsvHeader =
    "policy,H,use_gs,use_mask,noise_preset,trials,mean_norm_dist,success_rate,mean_dq_var,"
    "mean_opening_fraction,mean_wall_ms";
inline constexpr const char* kTraceCsvHeader = "step,q,dq,contact_x,contact_y,contact_z";

void write_metrics_csv(const EvalReport& report, const std::string& path);
void write_summary_csv(const EvalReport& report, const std::string& path);
void write_trace_csv(const RolloutResult& result, const std::string& path);

/// Gnuplot script for the aggregate table written next to the metrics CSV.
void write_gnuplot_script(const EvalReport& report, const std::string& summary_csv_path,
                          const std::string& script_path);

/// Reference evaluation presets: perturbation strengths and occlusion
/// coupling chosen so the qualitative policy orderings are visible while the
/// exact-predictor pipeline stays untouched.
NoiseModel reference_noise();
OcclusionModel reference_occlusion();

}  // namespace flowbot
