#include "flowbot/rollout.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "flowbot/detail/format.hpp"
#include "flowbot/errors.hpp"
#include "flowbot/rng.hpp"
#include "flowbot/trajectory.hpp"

namespace flowbot {

std::string to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::FlowBotPP: return "flowbotpp";
    case PolicyKind::AfOnly: return "af_only";
    default: return "no_mpc";
  }
}

PolicyKind policy_kind_from_string(const std::string& s) {
  if (s == "flowbotpp") return PolicyKind::FlowBotPP;
  if (s == "af_only") return PolicyKind::AfOnly;
  if (s == "no_mpc") return PolicyKind::NoMpc;
  throw ParseError("unknown policy '" + s + "'");
}

std::string PolicyParams::signature() const {
  std::ostringstream out;
  out << "policy=" << to_string(policy) << ";H=" << horizon << ";K=" << waypoint_count
      << ";max_steps=" << max_steps << ";gs=" << use_gs << ";mask=" << use_mask
      << ";classifier=" << (classifier == ClassifierMode::Oracle ? "oracle" : "heuristic")
      << ";margin=" << detail::g17(goal_margin);
  return out.str();
}

Eigen::Vector3d WorldState::contact_position() const {
  return pose_target_point(scene->target_joint(), contact_closed, q);
}

int select_contact(const Observation& obs, const std::vector<Eigen::Vector3d>& flow) {
  if (flow.size() != obs.points.size())
    throw std::invalid_argument("select_contact: flow length mismatch with observation");
  int best = -1;
  double best_norm = -1.0;
  for (std::size_t i = 0; i < obs.points.size(); ++i) {
    if (!obs.mask[i]) continue;
    const double norm = flow[i].norm();
    if (norm > best_norm) {
      best_norm = norm;
      best = static_cast<int>(i);
    }
  }
  if (best < 0) throw DegenerateError("select_contact: empty mask");
  return best;
}

double step_world(WorldState& world, const Eigen::Vector3d& target) {
  const JointSpec& joint = world.scene->target_joint();
  const double q_old = world.q;
  double dq_raw = 0.0;

  if (joint.type == JointType::Prismatic) {
    dq_raw = joint.axis_direction.dot(target - world.contact_position());
  } else {
    const Eigen::Vector3d& w = joint.axis_direction;
    const Eigen::Vector3d p = world.contact_position();
    const Eigen::Vector3d u = p - nearest_point_on_axis(p, joint.axis_origin, w);
    Eigen::Vector3d t = target - joint.axis_origin;
    t -= w * w.dot(t);  // project into the rotation plane
    if (u.norm() < 1e-12 || t.norm() < 1e-12) {
      dq_raw = 0.0;  // contact or target on the axis: no feasible rotation
    } else {
      dq_raw = std::atan2(u.cross(t).dot(w), u.dot(t));
    }
  }

  world.q = std::clamp(q_old + dq_raw, joint.limit_lower, joint.limit_upper);
  return world.q - q_old;
}

double dq_variance(const RolloutResult& result) {
  const std::size_t n = result.step_increments.size();
  if (n < 2) return 0.0;
  double mean = 0.0;
  for (const double dq : result.step_increments) mean += dq;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (const double dq : result.step_increments) var += (dq - mean) * (dq - mean);
  return var / static_cast<double>(n);
}

double opening_fraction(const RolloutResult& result) {
  const double range = result.q_goal - result.q_init;
  return range == 0.0 ? 0.0 : (result.q_end - result.q_init) / range;
}

namespace {

void validate_params(const PolicyParams& params) {
  if (params.waypoint_count < 1)
    throw std::invalid_argument("rollout: waypoint count K must be >= 1");
  if (params.policy == PolicyKind::FlowBotPP &&
      (params.horizon < 1 || params.horizon > params.waypoint_count))
    throw std::invalid_argument("rollout: horizon H must lie in [1, K]");
  if (params.max_steps < 1) throw std::invalid_argument("rollout: max_steps must be >= 1");
}

void finalize(RolloutResult& result) {
  result.q_end = result.q_trace.back();
  const double range = std::abs(result.q_goal - result.q_init);
  result.normalized_distance =
      range == 0.0 ? 0.0 : std::abs(result.q_end - result.q_goal) / range;
  result.success = result.normalized_distance <= kSuccessThreshold;
}

/// Flow at the contact for the AF-only baseline: the prediction at the
/// nearest masked observation point (the contact itself when it survived
/// occlusion).
const Eigen::Vector3d* flow_at_contact(const Observation& obs, const DenseFields& fields,
                                       const Eigen::Vector3d& contact) {
  int best = -1;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < obs.points.size(); ++i) {
    if (!obs.mask[i]) continue;
    const double dist = (obs.points[i] - contact).squaredNorm();
    if (dist < best_dist) {
      best_dist = dist;
      best = static_cast<int>(i);
    }
  }
  return best < 0 ? nullptr : &fields.flow[best];
}

}  // namespace

RolloutResult run_policy(const ArticulatedScene& scene, const PredictorSpec& predictor,
                         const OcclusionModel& occ, const PolicyParams& params) {
  validate_params(params);
  const JointSpec& joint = scene.target_joint();
  const double lo = joint.limit_lower;
  const double hi = joint.limit_upper;
  const double range = hi - lo;

  RolloutResult result;
  result.q_init = lo;
  result.q_goal = hi;
  result.q_trace.push_back(lo);

  // First observation; its seed equals occ.seed so an externally rendered t=0
  // observation reproduces it exactly.
  const Observation obs0 = render_observation(scene, lo, occ);
  const DenseFields fields0 = predict(predictor, scene, obs0, 0);
  if (obs0.mask_count() == 0) {
    result.contact_trace.push_back(Eigen::Vector3d::Zero());
    finalize(result);
    return result;
  }

  const JointType type = classify_articulation(scene, obs0, fields0, params.classifier);
  result.contact_index = select_contact(obs0, fields0.flow);

  WorldState world;
  world.scene = &scene;
  world.q = lo;
  world.attached = true;
  world.contact_part = obs0.source_part[result.contact_index];
  world.contact_sample = obs0.source_index[result.contact_index];
  // At q = limit_lower the pose transform is the identity, so the observed
  // contact position is its closed-state position.
  world.contact_closed = obs0.points[result.contact_index];
  result.contact_trace.push_back(world.contact_closed);

  const int steps_per_replan = params.policy == PolicyKind::NoMpc ? params.waypoint_count
                               : params.policy == PolicyKind::AfOnly ? 1
                                                                     : params.horizon;
  int consecutive_degenerate = 0;  // empty masks and failed estimates alike
  int consecutive_stall = 0;
  bool done = false;

  for (int replan = 0; !done; ++replan) {
    // Normal termination fires well before this; the cap only guards against
    // pathological degenerate/stall alternations.
    if (replan > 2 * params.max_steps + 10) break;

    OcclusionModel occ_t = occ;
    if (replan > 0) occ_t.seed = mix_seed(occ.seed, static_cast<std::uint64_t>(replan));
    const Observation obs = replan == 0 ? obs0 : render_observation(scene, world.q, occ_t);
    const DenseFields fields =
        replan == 0 ? fields0 : predict(predictor, scene, obs, static_cast<std::uint64_t>(replan));
    ++result.replan_count;
    const double q_before = world.q;

    bool degenerate = false;
    if (obs.mask_count() == 0) {
      degenerate = true;
    } else {
      try {
        const Eigen::Vector3d contact = world.contact_position();
        const double goal_travel = (hi - world.q) + params.goal_margin * range;
        TrajectoryParams traj;
        traj.waypoint_count = params.waypoint_count;

        std::vector<Eigen::Vector3d> targets;
        if (params.policy == PolicyKind::AfOnly) {
          // Replan every step: a fixed-length step along the predicted flow
          // at the contact. The step length matches one waypoint interval of
          // the planning policies.
          const Eigen::Vector3d* flow = flow_at_contact(obs, fields, contact);
          if (flow == nullptr || flow->norm() <= 1e-9)
            throw DegenerateError("af_only: no usable flow at the contact");
          double step_length = goal_travel / params.waypoint_count;
          if (type == JointType::Revolute) {
            const double radius =
                (contact -
                 nearest_point_on_axis(contact, joint.axis_origin, joint.axis_direction))
                    .norm();
            step_length *= radius;
          }
          targets.push_back(contact + step_length * flow->normalized());
        } else {
          const AxisEstimate estimate =
              aggregate_axis(obs, fields, type, params.use_gs, params.use_mask);
          TrajectoryPlan plan;
          if (type == JointType::Revolute) {
            traj.goal_angle = goal_travel;
            plan = plan_revolute(contact, estimate.direction, estimate.origin, traj);
          } else {
            traj.goal_length = goal_travel;
            plan = plan_prismatic(contact, estimate.direction, traj);
          }
          const int n_exec = std::min(steps_per_replan, params.waypoint_count);
          targets.assign(plan.waypoints.begin() + 1, plan.waypoints.begin() + 1 + n_exec);
        }

        for (const Eigen::Vector3d& target : targets) {
          const double dq = step_world(world, target);
          result.q_trace.push_back(world.q);
          result.step_increments.push_back(dq);
          result.contact_trace.push_back(world.contact_position());
          ++result.steps_executed;
          if (world.q >= hi - 1e-6 || result.steps_executed >= params.max_steps) {
            done = true;
            break;
          }
        }
      } catch (const DegenerateError&) {
        degenerate = true;
      }
    }

    if (degenerate) {
      if (++consecutive_degenerate >= 3) break;
    } else {
      consecutive_degenerate = 0;
    }
    if (std::abs(world.q - q_before) < 1e-8) {
      if (++consecutive_stall >= 3) break;
    } else {
      consecutive_stall = 0;
    }
    if (params.policy == PolicyKind::NoMpc) break;  // the entire first plan, no replanning
  }

  finalize(result);
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation sweep

EvalReport evaluate(const std::vector<ArticulatedScene>& scenes, const PredictorSpec& predictor,
                    const OcclusionModel& occ, const std::vector<PolicyParams>& grid, int trials,
                    std::uint64_t base_seed) {
  if (trials < 1) throw std::invalid_argument("evaluate: trials must be >= 1");
  EvalReport report;

  for (const ArticulatedScene& scene : scenes) {
    for (const PolicyParams& params : grid) {
      for (int trial = 0; trial < trials; ++trial) {
        const std::uint64_t seed = mix_seed(
            mix_seed(mix_seed(mix_seed(base_seed, scene.name), params.signature()),
                     static_cast<std::uint64_t>(trial)),
            predictor.label);

        OcclusionModel trial_occ = occ;
        trial_occ.seed = mix_seed(seed, 1);
        PredictorSpec trial_predictor = predictor;
        trial_predictor.noise.seed = mix_seed(seed, 2);

        const auto start = std::chrono::steady_clock::now();
        RolloutResult result = run_policy(scene, trial_predictor, trial_occ, params);
        const auto stop = std::chrono::steady_clock::now();

        TrialRecord record;
        record.scene = scene.name;
        record.policy = to_string(params.policy);
        record.horizon = params.horizon;
        record.use_gs = params.use_gs;
        record.use_mask = params.use_mask;
        record.noise_label = predictor.label;
        record.trial = trial;
        record.seed = seed;
        record.result = std::move(result);
        record.wall_ms =
            std::chrono::duration<double, std::milli>(stop - start).count();
        report.trials.push_back(std::move(record));
      }
    }
  }

  for (const PolicyParams& params : grid) {
    EvalAggregate agg;
    agg.policy = to_string(params.policy);
    agg.horizon = params.horizon;
    agg.use_gs = params.use_gs;
    agg.use_mask = params.use_mask;
    agg.noise_label = predictor.label;
    for (const TrialRecord& record : report.trials) {
      if (record.policy != agg.policy || record.horizon != agg.horizon ||
          record.use_gs != agg.use_gs || record.use_mask != agg.use_mask)
        continue;
      ++agg.trials;
      agg.mean_normalized_distance += record.result.normalized_distance;
      agg.success_rate += record.result.success ? 1.0 : 0.0;
      agg.mean_dq_variance += dq_variance(record.result);
      agg.mean_opening_fraction += opening_fraction(record.result);
      agg.mean_wall_ms += record.wall_ms;
    }
    if (agg.trials > 0) {
      const double n = agg.trials;
      agg.mean_normalized_distance /= n;
      agg.success_rate /= n;
      agg.mean_dq_variance /= n;
      agg.mean_opening_fraction /= n;
      agg.mean_wall_ms /= n;
    }
    report.aggregates.push_back(std::move(agg));
  }
  return report;
}

void write_metrics_csv(const EvalReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write metrics CSV '" + path + "'");
  out << kMetricsCsvHeader << "\n";
  for (const TrialRecord& r : report.trials) {
    char wall[32];
    std::snprintf(wall, sizeof(wall), "%.3f", r.wall_ms);
    out << r.scene << ',' << r.policy << ',' << r.horizon << ',' << int(r.use_gs) << ','
        << int(r.use_mask) << ',' << r.noise_label << ',' << r.trial << ',' << r.seed << ','
        << detail::g17(r.result.normalized_distance) << ',' << int(r.result.success) << ','
        << r.result.steps_executed << ',' << r.result.replan_count << ','
        << detail::g17(dq_variance(r.result)) << ',' << wall << "\n";
  }
  if (!out) throw IoError("failed while writing '" + path + "'");
}

void write_summary_csv(const EvalReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write summary CSV '" + path + "'");
  out << kSummaryCsvHeader << "\n";
  for (const EvalAggregate& a : report.aggregates) {
    char wall[32];
    std::snprintf(wall, sizeof(wall), "%.3f", a.mean_wall_ms);
    out << a.policy << ',' << a.horizon << ',' << int(a.use_gs) << ',' << int(a.use_mask) << ','
        << a.noise_label << ',' << a.trials << ',' << detail::g17(a.mean_normalized_distance)
        << ',' << detail::g17(a.success_rate) << ',' << detail::g17(a.mean_dq_variance) << ','
        << detail::g17(a.mean_opening_fraction) << ',' << wall << "\n";
  }
  if (!out) throw IoError("failed while writing '" + path + "'");
}

void write_trace_csv(const RolloutResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write trace CSV '" + path + "'");
  out << kTraceCsvHeader << "\n";
  for (std::size_t i = 0; i < result.q_trace.size(); ++i) {
    const double dq = i == 0 ? 0.0 : result.step_increments[i - 1];
    const Eigen::Vector3d contact =
        i < result.contact_trace.size() ? result.contact_trace[i] : Eigen::Vector3d::Zero();
    out << i << ',' << detail::g17(result.q_trace[i]) << ',' << detail::g17(dq) << ','
        << detail::g17(contact.x()) << ',' << detail::g17(contact.y()) << ','
        << detail::g17(contact.z()) << "\n";
  }
  if (!out) throw IoError("failed while writing '" + path + "'");
}

void write_gnuplot_script(const EvalReport& report, const std::string& summary_csv_path,
                          const std::string& script_path) {
  std::ofstream out(script_path);
  if (!out) throw IoError("cannot write gnuplot script '" + script_path + "'");
  out << "set datafile separator ','\n"
      << "set style data histograms\n"
      << "set style fill solid 0.8\n"
      << "set ylabel 'mean normalized distance'\n"
      << "set xtics rotate by -30\n"
      << "set key off\n"
      << "set term png size 900,540\n"
      << "set output 'metrics.png'\n"
      << "plot '" << summary_csv_path
      << "' every ::1 using 7:xtic(sprintf('%s H=%s', strcol(1), strcol(2))) lc rgb '#4477aa'\n";
  if (!out) throw IoError("failed while writing '" + script_path + "'");
}

NoiseModel reference_noise() {
  NoiseModel noise;
  noise.flow_sigma = 1.8;
  noise.proj_sigma = 0.4;
  noise.proj_bias_deg = 10.0;
  return noise;
}

OcclusionModel reference_occlusion() {
  OcclusionModel occ;
  occ.base_dropout = 0.1;
  occ.opening_coupled_dropout = 0.6;
  return occ;
}

}  // namespace flowbot
