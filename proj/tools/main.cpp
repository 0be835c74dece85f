// flowbot: scene generation, field generation, axis inference, planning,
// rollouts, and evaluation sweeps for articulated-object manipulation.
//
// Exit codes: 0 success, 1 usage error, 2 degenerate estimation, 3 I/O or
// file-format error.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <string>
#include <vector>

#include "flowbot/detail/format.hpp"
#include "flowbot/errors.hpp"
#include "flowbot/estimation.hpp"
#include "flowbot/fields.hpp"
#include "flowbot/predictors.hpp"
#include "flowbot/rng.hpp"
#include "flowbot/rollout.hpp"
#include "flowbot/scene.hpp"
#include "flowbot/scene_gen.hpp"
#include "flowbot/trajectory.hpp"

namespace {

using namespace flowbot;

struct OcclusionFlags {
  double base_dropout = 0.0;
  double coupled_dropout = 0.0;
  std::uint64_t seed = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--base-dropout", base_dropout, "occlusion: baseline dropout probability")
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--coupled-dropout", coupled_dropout,
                    "occlusion: extra dropout proportional to the opening fraction")
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--occ-seed", seed, "occlusion/observation seed");
  }

  OcclusionModel model() const {
    if (base_dropout + coupled_dropout > 1.0)
      throw std::invalid_argument(
          "occlusion: base-dropout + coupled-dropout must not exceed 1");
    OcclusionModel occ;
    occ.base_dropout = base_dropout;
    occ.opening_coupled_dropout = coupled_dropout;
    occ.seed = seed;
    return occ;
  }
};

struct NoiseFlags {
  std::string predictor = "exact";
  double flow_sigma = 0.0;
  double proj_sigma = 0.0;
  double proj_bias_deg = 0.0;
  std::uint64_t seed = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--predictor", predictor, "field predictor")
        ->check(CLI::IsMember({"exact", "noisy"}));
    cmd->add_option("--flow-sigma", flow_sigma, "noisy: flow rotation sigma (radians)")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--proj-sigma", proj_sigma, "noisy: projection magnitude sigma")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--proj-bias-deg", proj_bias_deg,
                    "noisy: systematic projection tilt toward the flow (degrees)")
        ->check(CLI::Range(0.0, 90.0 - 1e-9));
    cmd->add_option("--noise-seed", seed, "noisy: perturbation seed");
  }

  PredictorSpec spec() const {
    PredictorSpec spec;
    if (predictor == "noisy") {
      spec.kind = PredictorSpec::Kind::Noisy;
      spec.noise.flow_sigma = flow_sigma;
      spec.noise.proj_sigma = proj_sigma;
      spec.noise.proj_bias_deg = proj_bias_deg;
      spec.noise.seed = seed;
      spec.label = "noisy";
    }
    return spec;
  }
};

Observation observation_from_loaded(const LoadedFields& loaded) {
  Observation obs;
  obs.points = loaded.points;
  obs.mask = loaded.fields.mask;
  obs.source_part.assign(loaded.points.size(), 0);
  obs.source_index.resize(loaded.points.size());
  for (std::size_t i = 0; i < loaded.points.size(); ++i)
    obs.source_index[i] = static_cast<int>(i);
  return obs;
}

/// First-iteration plan of a rollout, reproduced standalone so that the
/// gen -> infer -> plan pipeline and `rollout --plan-out` agree bit for bit.
TrajectoryPlan first_plan(const ArticulatedScene& scene, const PredictorSpec& predictor,
                          const OcclusionModel& occ, const PolicyParams& params) {
  const JointSpec& joint = scene.target_joint();
  const Observation obs = render_observation(scene, joint.limit_lower, occ);
  if (obs.mask_count() == 0)
    throw DegenerateError("first plan: the initial observation has an empty mask");
  const DenseFields fields = predict(predictor, scene, obs, 0);
  const JointType type = classify_articulation(scene, obs, fields, params.classifier);
  const int contact = select_contact(obs, fields.flow);
  const AxisEstimate estimate =
      aggregate_axis(obs, fields, type, params.use_gs, params.use_mask);

  TrajectoryParams traj;
  traj.waypoint_count = params.waypoint_count;
  const double goal_travel =
      (joint.limit_upper - joint.limit_lower) + params.goal_margin * joint.range();
  if (type == JointType::Revolute) {
    traj.goal_angle = goal_travel;
    return plan_revolute(obs.points[contact], estimate.direction, estimate.origin, traj);
  }
  traj.goal_length = goal_travel;
  return plan_prismatic(obs.points[contact], estimate.direction, traj);
}

int cmd_make_scenes(int count, std::uint64_t seed, const std::string& out_dir,
                    int sample_count) {
  std::filesystem::create_directories(out_dir);
  const auto scenes = make_scene_suite(count, seed, sample_count);
  for (const ArticulatedScene& scene : scenes) {
    const auto path = std::filesystem::path(out_dir) / (scene.name + ".urdf");
    save_scene_file(scene, path.string());
  }
  std::cout << "wrote " << scenes.size() << " scene files to " << out_dir << "\n";
  return 0;
}

int cmd_gen(const std::string& scene_path, double q, bool q_given, const OcclusionFlags& occ,
            const std::string& out) {
  const ArticulatedScene scene = load_scene_file(scene_path);
  const JointSpec& joint = scene.target_joint();
  const double config = q_given ? q : joint.limit_lower;
  if (config < joint.limit_lower || config > joint.limit_upper)
    throw std::invalid_argument("--q outside the joint limits [" +
                                std::to_string(joint.limit_lower) + ", " +
                                std::to_string(joint.limit_upper) + "]");
  const Observation obs = render_observation(scene, config, occ.model());
  const DenseFields fields = gt_fields(obs, joint);
  write_fields_csv(obs, fields, out);
  std::cout << "wrote " << obs.points.size() << " points (" << obs.mask_count()
            << " masked) to " << out << "\n";
  return 0;
}

int cmd_infer(const std::string& fields_path, const std::string& type, bool use_gs,
              bool use_mask) {
  const LoadedFields loaded = read_fields_csv(fields_path);
  const Observation obs = observation_from_loaded(loaded);
  const AxisEstimate estimate =
      aggregate_axis(obs, loaded.fields, joint_type_from_string(type), use_gs, use_mask);
  std::cout << axis_estimate_to_json(estimate) << "\n";
  return 0;
}

int cmd_plan(const std::string& axis_path, const std::vector<double>& contact, int waypoints,
             double phi_g, double l_g, bool with_orientations, const std::string& out) {
  std::ifstream in(axis_path);
  if (!in) throw IoError("cannot open axis JSON '" + axis_path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const AxisEstimate estimate = axis_estimate_from_json(buffer.str());

  TrajectoryParams params;
  params.waypoint_count = waypoints;
  params.goal_angle = phi_g;
  params.goal_length = l_g;
  if (estimate.type == JointType::Revolute && phi_g == 0.0)
    throw std::invalid_argument("revolute plans need a nonzero --phi-g");
  if (estimate.type == JointType::Prismatic && l_g == 0.0)
    throw std::invalid_argument("prismatic plans need a nonzero --l-g");

  const Eigen::Vector3d p(contact[0], contact[1], contact[2]);
  TrajectoryPlan plan;
  if (with_orientations) {
    plan = plan_full_pose(p, Eigen::Matrix3d::Identity(), estimate, params);
  } else if (estimate.type == JointType::Revolute) {
    plan = plan_revolute(p, estimate.direction, estimate.origin, params);
  } else {
    plan = plan_prismatic(p, estimate.direction, params);
  }
  write_trajectory_csv(plan, out);
  std::cout << "wrote " << plan.waypoints.size() << " waypoints to " << out << "\n";
  return 0;
}

int cmd_rollout(const std::string& scene_path, const PolicyParams& params,
                const NoiseFlags& noise, const OcclusionFlags& occ, const std::string& trace_out,
                const std::string& plan_out) {
  const ArticulatedScene scene = load_scene_file(scene_path);
  const PredictorSpec predictor = noise.spec();
  const OcclusionModel occlusion = occ.model();

  if (!plan_out.empty()) {
    if (params.policy == PolicyKind::AfOnly)
      throw std::invalid_argument("--plan-out requires a planning policy, not af_only");
    write_trajectory_csv(first_plan(scene, predictor, occlusion, params), plan_out);
  }

  const RolloutResult result = run_policy(scene, predictor, occlusion, params);
  if (!trace_out.empty()) write_trace_csv(result, trace_out);

  nlohmann::ordered_json out;
  out["scene"] = scene.name;
  out["policy"] = to_string(params.policy);
  out["H"] = params.horizon;
  out["K"] = params.waypoint_count;
  out["normalized_distance"] = result.normalized_distance;
  out["success"] = result.success;
  out["steps"] = result.steps_executed;
  out["replans"] = result.replan_count;
  out["q_init"] = result.q_init;
  out["q_goal"] = result.q_goal;
  out["q_end"] = result.q_end;
  out["dq_variance"] = dq_variance(result);
  out["opening_fraction"] = opening_fraction(result);
  out["contact_index"] = result.contact_index;
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_eval(const std::string& scene_dir, const std::string& policy, int horizon,
             const std::string& h_sweep, bool ablate_gs, bool ablate_mask, int waypoints,
             int max_steps, int trials, std::uint64_t base_seed, const std::string& preset,
             const std::string& out, const std::string& summary_out, bool emit_gnuplot) {
  // Validate the requested grid before touching the filesystem so malformed
  // flags surface as usage errors even when the scene directory is also bad.
  std::vector<PolicyParams> grid;
  auto base_params = [&](PolicyKind kind, int h) {
    PolicyParams p;
    p.policy = kind;
    p.horizon = h;
    p.waypoint_count = waypoints;
    p.max_steps = max_steps;
    return p;
  };
  if (!h_sweep.empty()) {
    std::stringstream stream(h_sweep);
    std::string token;
    while (std::getline(stream, token, ',')) {
      if (token == "nompc" || token == "no_mpc") {
        grid.push_back(base_params(PolicyKind::NoMpc, horizon));
      } else {
        long h = 0;
        try {
          h = detail::parse_long(token, "--H-sweep");
        } catch (const ParseError&) {
          throw std::invalid_argument("--H-sweep entries must be integers or 'nompc', got '" +
                                      token + "'");
        }
        grid.push_back(base_params(PolicyKind::FlowBotPP, static_cast<int>(h)));
      }
    }
  } else {
    grid.push_back(base_params(policy_kind_from_string(policy), horizon));
  }
  const std::size_t plain = grid.size();
  if (ablate_gs) {
    for (std::size_t i = 0; i < plain; ++i) {
      PolicyParams p = grid[i];
      p.use_gs = false;
      grid.push_back(p);
    }
  }
  if (ablate_mask) {
    for (std::size_t i = 0; i < plain; ++i) {
      PolicyParams p = grid[i];
      p.use_mask = false;
      grid.push_back(p);
    }
  }

  std::vector<std::filesystem::path> files;
  {
    std::error_code ec;
    std::filesystem::directory_iterator it(scene_dir, ec);
    if (ec) throw IoError("cannot read scene directory '" + scene_dir + "': " + ec.message());
    for (const auto& entry : it)
      if (entry.path().extension() == ".urdf") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no .urdf scenes found in '" + scene_dir + "'");
  std::vector<ArticulatedScene> scenes;
  scenes.reserve(files.size());
  for (const auto& file : files) scenes.push_back(load_scene_file(file.string()));

  PredictorSpec predictor;
  OcclusionModel occ;
  if (preset == "reference") {
    predictor.kind = PredictorSpec::Kind::Noisy;
    predictor.noise = reference_noise();
    predictor.label = "reference";
    occ = reference_occlusion();
  }

  const EvalReport report = evaluate(scenes, predictor, occ, grid, trials, base_seed);
  write_metrics_csv(report, out);
  if (!summary_out.empty()) {
    write_summary_csv(report, summary_out);
    if (emit_gnuplot) {
      const auto script =
          std::filesystem::path(summary_out).replace_extension(".gnuplot").string();
      write_gnuplot_script(report, summary_out, script);
    }
  }

  std::cout << kSummaryCsvHeader << "\n";
  for (const EvalAggregate& a : report.aggregates) {
    char wall[32];
    std::snprintf(wall, sizeof(wall), "%.3f", a.mean_wall_ms);
    std::cout << a.policy << ',' << a.horizon << ',' << int(a.use_gs) << ',' << int(a.use_mask)
              << ',' << a.noise_label << ',' << a.trials << ','
              << detail::g17(a.mean_normalized_distance) << ',' << detail::g17(a.success_rate)
              << ',' << detail::g17(a.mean_dq_variance) << ','
              << detail::g17(a.mean_opening_fraction) << ',' << wall << "\n";
  }
  std::cout << "wrote " << report.trials.size() << " trial rows to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FlowBot++ articulated-object manipulation pipeline"};
  app.require_subcommand(1);

  // make-scenes ------------------------------------------------------------
  auto* make_scenes = app.add_subcommand("make-scenes", "generate a scene suite");
  int ms_count = 10;
  std::uint64_t ms_seed = 0;
  std::string ms_out_dir;
  int ms_samples = 2000;
  make_scenes->add_option("--count", ms_count, "number of scenes")->check(CLI::PositiveNumber);
  make_scenes->add_option("--seed", ms_seed, "generator seed");
  make_scenes->add_option("--out-dir", ms_out_dir, "output directory")->required();
  make_scenes->add_option("--sample-count", ms_samples, "surface samples per part")
      ->check(CLI::PositiveNumber);

  // gen ---------------------------------------------------------------------
  auto* gen = app.add_subcommand("gen", "render an observation and write exact fields");
  std::string gen_scene, gen_out;
  double gen_q = 0.0;
  OcclusionFlags gen_occ;
  gen->add_option("--scene", gen_scene, "scene file")->required();
  auto* gen_q_opt = gen->add_option("--q", gen_q, "joint configuration (default: closed)");
  gen_occ.attach(gen);
  gen->add_option("--out", gen_out, "output fields CSV")->required();

  // infer ---------------------------------------------------------------------
  auto* infer = app.add_subcommand("infer", "estimate the joint axis from a fields CSV");
  std::string infer_fields, infer_type;
  bool infer_gs = true, infer_mask = true;
  infer->add_option("--fields", infer_fields, "fields CSV")->required();
  infer->add_option("--type", infer_type, "joint type")
      ->required()
      ->check(CLI::IsMember({"revolute", "prismatic"}));
  infer->add_flag("--gs,!--no-gs", infer_gs, "apply the projection correction (default on)");
  infer->add_flag("--mask,!--no-mask", infer_mask, "restrict to masked points (default on)");

  // plan ---------------------------------------------------------------------
  auto* plan = app.add_subcommand("plan", "synthesize a trajectory from an axis estimate");
  std::string plan_axis, plan_out;
  std::vector<double> plan_contact;
  int plan_k = 20;
  double plan_phi = 0.0, plan_l = 0.0;
  bool plan_orient = false;
  plan->add_option("--axis", plan_axis, "axis estimate JSON file")->required();
  plan->add_option("--contact", plan_contact, "contact point x,y,z")
      ->required()
      ->delimiter(',')
      ->expected(3);
  plan->add_option("--K", plan_k, "waypoint count")->check(CLI::PositiveNumber);
  plan->add_option("--phi-g", plan_phi, "goal angle (radians, revolute)");
  plan->add_option("--l-g", plan_l, "goal travel (meters, prismatic)");
  plan->add_flag("--with-orientations", plan_orient, "include the end-effector orientations");
  plan->add_option("--out", plan_out, "output trajectory CSV")->required();

  // rollout -------------------------------------------------------------------
  auto* rollout = app.add_subcommand("rollout", "run one closed-loop episode");
  std::string ro_scene, ro_policy = "flowbotpp", ro_classifier = "oracle";
  std::string ro_trace, ro_plan;
  PolicyParams ro_params;
  NoiseFlags ro_noise;
  OcclusionFlags ro_occ;
  rollout->add_option("--scene", ro_scene, "scene file")->required();
  rollout->add_option("--policy", ro_policy, "policy")
      ->check(CLI::IsMember({"flowbotpp", "af_only", "no_mpc"}));
  rollout->add_option("--H", ro_params.horizon, "waypoints executed per replan");
  rollout->add_option("--K", ro_params.waypoint_count, "waypoints per plan")
      ->check(CLI::PositiveNumber);
  rollout->add_option("--max-steps", ro_params.max_steps, "step budget")
      ->check(CLI::PositiveNumber);
  rollout->add_flag("--gs,!--no-gs", ro_params.use_gs, "projection correction (default on)");
  rollout->add_flag("--mask,!--no-mask", ro_params.use_mask,
                    "restrict estimation to masked points (default on)");
  rollout->add_option("--classifier", ro_classifier, "joint classifier")
      ->check(CLI::IsMember({"oracle", "heuristic"}));
  rollout->add_option("--goal-margin", ro_params.goal_margin,
                      "extra goal travel as a fraction of the full range")
      ->check(CLI::NonNegativeNumber);
  ro_noise.attach(rollout);
  ro_occ.attach(rollout);
  rollout->add_option("--trace-out", ro_trace, "write the per-step trace CSV here");
  rollout->add_option("--plan-out", ro_plan, "write the first plan CSV here");

  // eval ----------------------------------------------------------------------
  auto* eval = app.add_subcommand("eval", "evaluation sweep over a scene directory");
  std::string ev_dir, ev_policy = "flowbotpp", ev_sweep, ev_preset = "exact";
  std::string ev_out, ev_summary;
  int ev_h = 7, ev_k = 20, ev_max_steps = 100, ev_trials = 1;
  std::uint64_t ev_seed = 0;
  bool ev_ablate_gs = false, ev_ablate_mask = false, ev_gnuplot = false;
  eval->add_option("--scene-dir", ev_dir, "directory of .urdf scenes")->required();
  eval->add_option("--policy", ev_policy, "policy (ignored when --H-sweep is given)")
      ->check(CLI::IsMember({"flowbotpp", "af_only", "no_mpc"}));
  eval->add_option("--H", ev_h, "horizon for --policy runs");
  eval->add_option("--H-sweep", ev_sweep, "comma list of horizons, e.g. 1,3,5,7,9,nompc");
  eval->add_flag("--ablate-gs", ev_ablate_gs, "also run every entry without the correction");
  eval->add_flag("--ablate-mask", ev_ablate_mask, "also run every entry without the mask");
  eval->add_option("--K", ev_k, "waypoints per plan")->check(CLI::PositiveNumber);
  eval->add_option("--max-steps", ev_max_steps, "step budget")->check(CLI::PositiveNumber);
  eval->add_option("--trials", ev_trials, "trials per scene and grid entry")
      ->check(CLI::PositiveNumber);
  eval->add_option("--base-seed", ev_seed, "base seed for trial derivation");
  eval->add_option("--preset", ev_preset, "noise/occlusion preset")
      ->check(CLI::IsMember({"exact", "reference"}));
  eval->add_option("--out", ev_out, "metrics CSV path")->required();
  eval->add_option("--summary-out", ev_summary, "aggregate CSV path");
  eval->add_flag("--emit-gnuplot", ev_gnuplot, "write a gnuplot script next to the summary");

  try {
    app.parse(argc, argv);

    if (make_scenes->parsed())
      return cmd_make_scenes(ms_count, ms_seed, ms_out_dir, ms_samples);
    if (gen->parsed())
      return cmd_gen(gen_scene, gen_q, gen_q_opt->count() > 0, gen_occ, gen_out);
    if (infer->parsed()) return cmd_infer(infer_fields, infer_type, infer_gs, infer_mask);
    if (plan->parsed())
      return cmd_plan(plan_axis, plan_contact, plan_k, plan_phi, plan_l, plan_orient, plan_out);
    if (rollout->parsed()) {
      ro_params.policy = policy_kind_from_string(ro_policy);
      ro_params.classifier = classifier_mode_from_string(ro_classifier);
      return cmd_rollout(ro_scene, ro_params, ro_noise, ro_occ, ro_trace, ro_plan);
    }
    if (eval->parsed())
      return cmd_eval(ev_dir, ev_policy, ev_h, ev_sweep, ev_ablate_gs, ev_ablate_mask, ev_k,
                      ev_max_steps, ev_trials, ev_seed, ev_preset, ev_out, ev_summary,
                      ev_gnuplot);
    return 1;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exits 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the usage message
    return 1;
  } catch (const flowbot::DegenerateError& e) {
    std::cerr << "degenerate estimation: " << e.what() << "\n";
    return 2;
  } catch (const flowbot::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const flowbot::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::domain_error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
