#include "lstdac/cli.hpp"

#include "lstdac/errors.hpp"
#include "lstdac/oracles.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <set>

#ifndef LSTDAC_VERSION
#define LSTDAC_VERSION "unknown"
#endif
#ifndef LSTDAC_GIT_REV
#define LSTDAC_GIT_REV "unknown"
#endif

namespace lstdac {

namespace fs = std::filesystem;

std::string version_string() { return std::string("lstdac ") + LSTDAC_VERSION + " (" + LSTDAC_GIT_REV + ")"; }

Environment make_environment(const GridSpec& spec) {
  Environment env;
  env.spec = spec;
  env.mrp = build_grid_mdp(spec);
  env.ssp = mrp_to_ssp(env.mrp);
  auto features = std::make_shared<const GridFeatures>(spec, env.mrp);
  env.features = features;
  env.mrp_policy = std::make_shared<const BoltzmannPolicy>(features);
  env.ssp_policy = std::make_shared<const BoltzmannPolicy>(
      std::make_shared<const SspFeatureAdapter>(features, env.ssp));
  return env;
}

namespace {

json slip_to_json(const SlipModel& s) {
  return {{"base_intended", s.base_intended},
          {"lateral_split", s.lateral_split},
          {"back_fraction", s.back_fraction},
          {"roughness_gain", s.roughness_gain}};
}

SlipModel slip_from_json(const json& doc) {
  SlipModel s;
  s.base_intended = doc.value("base_intended", s.base_intended);
  s.lateral_split = doc.value("lateral_split", s.lateral_split);
  s.back_fraction = doc.value("back_fraction", s.back_fraction);
  s.roughness_gain = doc.value("roughness_gain", s.roughness_gain);
  return s;
}

json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(what + ": " + e.what());
  }
}

} // namespace

void cmd_build_env(const BuildEnvConfig& config) {
  if (config.output.empty()) throw std::invalid_argument("build-env: output directory required");
  GridSpec spec;
  std::string roughness_source = "seed";
  if (!config.fixture.empty()) {
    spec = fixture_grid(config.fixture);
  } else if (!config.grid_file.empty()) {
    spec = load_grid(read_text_file(config.grid_file));
  } else {
    throw std::invalid_argument("build-env: give either --fixture or --grid");
  }
  spec.slip = config.slip;
  spec.neighborhood_radius = config.neighborhood_radius;
  if (!config.roughness_file.empty()) {
    spec.roughness = load_roughness_csv(read_text_file(config.roughness_file), spec.width, spec.height);
    roughness_source = "file";
  } else {
    assign_random_roughness(spec, config.env_seed);
  }
  const Environment env = make_environment(spec);

  fs::create_directories(config.output);
  write_text_file(config.output / "grid.txt", save_grid(spec));
  write_text_file(config.output / "roughness.csv", save_roughness_csv(spec));
  write_text_file(config.output / "mrp.json", mrp_to_json(env.mrp).dump() + "\n");
  write_text_file(config.output / "ssp.json", mdp_to_json(env.ssp.mdp).dump() + "\n");
  write_text_file(config.output / "origin_map.json", origin_map_to_json(env.ssp).dump() + "\n");
  const json provenance = {{"tool", version_string()},
                           {"fixture", config.fixture},
                           {"grid_file", config.grid_file.string()},
                           {"roughness_source", roughness_source},
                           {"env_seed", config.env_seed},
                           {"width", spec.width},
                           {"height", spec.height},
                           {"neighborhood_radius", spec.neighborhood_radius},
                           {"slip", slip_to_json(spec.slip)}};
  write_text_file(config.output / "env.json", provenance.dump(2) + "\n");
}

Environment load_environment(const fs::path& dir, std::optional<std::size_t> radius_override) {
  const json provenance = parse_json_text(read_text_file(dir / "env.json"), "env.json");
  GridSpec spec = load_grid(read_text_file(dir / "grid.txt"));
  spec.roughness = load_roughness_csv(read_text_file(dir / "roughness.csv"), spec.width, spec.height);
  spec.slip = slip_from_json(provenance.value("slip", json::object()));
  spec.neighborhood_radius = provenance.value("neighborhood_radius", spec.neighborhood_radius);
  Environment env = make_environment(spec);
  if (fs::exists(dir / "mrp.json")) {
    const MrpProblem stored = mrp_from_json(parse_json_text(read_text_file(dir / "mrp.json"), "mrp.json"));
    if (!(stored == env.mrp)) {
      throw ValidationError("environment " + dir.string() + ": mrp.json does not match grid.txt/roughness.csv");
    }
  }
  if (radius_override && *radius_override != spec.neighborhood_radius) {
    spec.neighborhood_radius = *radius_override;
    env = make_environment(spec);
  }
  return env;
}

json RunConfig::to_json() const {
  return {{"env", env.string()},
          {"env_seed", env_seed},
          {"train_seed", train_seed},
          {"lambda", lambda},
          {"clip_radius", clip_radius},
          {"actor_step", actor_step},
          {"neighborhood_radius", neighborhood_radius},
          {"theta0", theta0},
          {"ridge_delta", ridge_delta},
          {"actor_warmup_steps", actor_warmup_steps},
          {"trace_reset_on_restart", trace_reset_on_restart},
          {"fixed_policy", fixed_policy},
          {"total_steps", total_steps},
          {"checkpoint_every", checkpoint_every},
          {"max_episode_steps", max_episode_steps},
          {"output", output.string()}};
}

RunConfig RunConfig::from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("run config must be a JSON object");
  const std::set<std::string> known{"env", "env_seed", "train_seed", "lambda", "clip_radius",
                                    "actor_step", "neighborhood_radius", "theta0", "ridge_delta",
                                    "actor_warmup_steps", "trace_reset_on_restart", "fixed_policy",
                                    "total_steps", "checkpoint_every", "max_episode_steps", "output"};
  for (const auto& [key, value] : doc.items()) {
    if (!known.count(key)) throw ValidationError("run config: unknown key '" + key + "'");
  }
  RunConfig c;
  try {
    c.env = doc.value("env", c.env.string());
    c.env_seed = doc.value("env_seed", c.env_seed);
    c.train_seed = doc.value("train_seed", c.train_seed);
    c.lambda = doc.value("lambda", c.lambda);
    c.clip_radius = doc.value("clip_radius", c.clip_radius);
    c.actor_step = doc.value("actor_step", c.actor_step);
    c.neighborhood_radius = doc.value("neighborhood_radius", c.neighborhood_radius);
    c.theta0 = doc.value("theta0", c.theta0);
    c.ridge_delta = doc.value("ridge_delta", c.ridge_delta);
    c.actor_warmup_steps = doc.value("actor_warmup_steps", c.actor_warmup_steps);
    c.trace_reset_on_restart = doc.value("trace_reset_on_restart", c.trace_reset_on_restart);
    c.fixed_policy = doc.value("fixed_policy", c.fixed_policy);
    c.total_steps = doc.value("total_steps", c.total_steps);
    c.checkpoint_every = doc.value("checkpoint_every", c.checkpoint_every);
    c.max_episode_steps = doc.value("max_episode_steps", c.max_episode_steps);
    c.output = doc.value("output", c.output.string());
  } catch (const json::exception& e) {
    throw ValidationError(std::string("run config: ") + e.what());
  }
  return c;
}

LearnerConfig RunConfig::learner() const {
  LearnerConfig cfg;
  cfg.lambda = lambda;
  cfg.clip_radius = clip_radius;
  cfg.actor_step = actor_step;
  cfg.dim = theta0.size();
  cfg.trace_reset_on_restart = trace_reset_on_restart;
  cfg.actor_warmup_steps = actor_warmup_steps;
  cfg.ridge_delta = ridge_delta;
  cfg.max_episode_steps = max_episode_steps;
  cfg.actor_enabled = !fixed_policy;
  return cfg;
}

void RunConfig::validate() const {
  learner().validate();
  if (env.empty()) throw ValidationError("run config: env directory required");
  if (!fs::is_directory(env)) throw ValidationError("run config: env directory " + env.string() + " does not exist");
  if (output.empty()) throw ValidationError("run config: output directory required");
  if (theta0.size() != 2) throw ValidationError("run config: theta0 must have two entries for grid features");
  for (double t : theta0) {
    if (!std::isfinite(t)) throw ValidationError("run config: theta0 must be finite");
  }
}

TrainResult cmd_train(const RunConfig& config) {
  config.validate();
  const Environment env = load_environment(config.env, config.neighborhood_radius);
  const LearnerConfig learner = config.learner();
  const PolicyParams theta0(Eigen::Map<const Eigen::VectorXd>(config.theta0.data(),
                                                              static_cast<Eigen::Index>(config.theta0.size())));
  const auto exact_reach = [&](const PolicyParams& p) {
    return rsp_reachability(env.mrp, *env.mrp_policy, p).values[static_cast<Eigen::Index>(env.mrp.initial_state())];
  };

  TrainResult result;
  result.max_reachability =
      max_reachability(env.mrp).values[static_cast<Eigen::Index>(env.mrp.initial_state())];
  result.initial_reachability = exact_reach(theta0);

  TrainingOptions options;
  options.total_steps = config.total_steps;
  options.record_every = config.checkpoint_every;
  options.checkpoint_every = config.checkpoint_every;
  Rng rng(config.train_seed);
  result.history = run_training(env.ssp, *env.ssp_policy, theta0, learner, rng, options,
                                [&](const PolicyParams& p, std::uint64_t) { return exact_reach(p); });
  result.final_reachability = exact_reach(result.history.final_params);

  fs::create_directories(config.output);
  UpdateRecord first;
  first.theta = theta0.theta;
  first.exact_reach = result.initial_reachability;
  std::string csv = history_csv_header(theta0.dim()) + history_csv_row(first);
  for (const auto& rec : result.history.records) csv += history_csv_row(rec);
  result.csv_rows = 1 + result.history.records.size();
  write_text_file(config.output / "history.csv", csv);

  const auto& final_theta = result.history.final_params.theta;
  const json theta_doc = {
      {"theta", std::vector<double>(final_theta.data(), final_theta.data() + final_theta.size())},
      {"initial_theta", config.theta0},
      {"initial_reachability", result.initial_reachability},
      {"final_reachability", result.final_reachability},
      {"max_reachability", result.max_reachability},
      {"steps", config.total_steps},
      {"actor_updates", result.history.updates},
      {"episodes", result.history.episodes},
      {"cap_events", result.history.cap_events},
      {"critic_solve_failures", result.history.final_critic.solve_failures}};
  write_text_file(config.output / "theta.json", theta_doc.dump(2) + "\n");

  json provenance = json::object();
  if (fs::exists(config.env / "env.json")) {
    provenance = parse_json_text(read_text_file(config.env / "env.json"), "env.json");
  }
  const json manifest = {{"tool", version_string()},
                         {"command", "train"},
                         {"config", config.to_json()},
                         {"environment", provenance},
                         {"seeds", {{"env_seed", provenance.value("env_seed", config.env_seed)},
                                    {"train_seed", config.train_seed}}}};
  write_text_file(config.output / "manifest.json", manifest.dump(2) + "\n");
  return result;
}

MonteCarloEstimate simulate_reachability(const MrpProblem& problem, const Rsp& rsp,
                                         const PolicyParams& params, std::uint64_t episodes,
                                         std::uint64_t seed, std::size_t max_steps) {
  if (episodes == 0) throw std::invalid_argument("simulate_reachability: need at least one episode");
  const FiniteMdp& mdp = problem.mdp;
  const Eigen::MatrixXd mu = policy_table(rsp, params);
  std::vector<char> goal(mdp.num_states(), 0);
  std::vector<char> unsafe(mdp.num_states(), 0);
  for (StateIndex g : problem.goal_states) goal[g] = 1;
  for (StateIndex b : problem.unsafe_states) unsafe[b] = 1;

  MonteCarloEstimate est;
  est.episodes = episodes;
  std::uint64_t hits = 0;
  std::vector<double> probs(mdp.num_actions());
  for (std::uint64_t i = 0; i < episodes; ++i) {
    Rng rng(derive_seed(seed, i));
    StateIndex x = mdp.initial_state();
    std::size_t steps = 0;
    while (!goal[x] && !unsafe[x]) {
      if (steps++ == max_steps) {
        ++est.capped;
        break;
      }
      for (ActionIndex u = 0; u < mdp.num_actions(); ++u) probs[u] = mu(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(u));
      const ActionIndex u = rng.categorical(probs);
      x = sample_transition(mdp, x, u, rng);
    }
    if (goal[x]) ++hits;
  }
  const double n = static_cast<double>(episodes);
  est.mean = static_cast<double>(hits) / n;
  est.standard_error = std::sqrt(est.mean * (1.0 - est.mean) / n);
  return est;
}

json cmd_evaluate(const EvaluateConfig& config) {
  const Environment env = load_environment(config.env);
  if (config.theta.size() != env.mrp_policy->dim()) {
    throw ValidationError("evaluate: theta must have " + std::to_string(env.mrp_policy->dim()) + " entries");
  }
  const PolicyParams params(Eigen::Map<const Eigen::VectorXd>(config.theta.data(),
                                                              static_cast<Eigen::Index>(config.theta.size())));
  const auto x0 = static_cast<Eigen::Index>(env.mrp.initial_state());
  json report = {{"tool", version_string()}, {"env", config.env.string()}, {"theta", config.theta}};
  json oracles = json::array();

  std::optional<double> exact;
  if (config.mode != EvalMode::MonteCarlo) {
    const StateValues reach = rsp_reachability(env.mrp, *env.mrp_policy, params);
    const TotalCost cost = expected_total_cost(env.ssp, *env.ssp_policy, params);
    const MaxReachability best = max_reachability(env.mrp);
    exact = reach.values[x0];
    const double implied = reachability_from_cost(cost.value);
    report["exact"] = {{"reachability", *exact},
                       {"expected_total_cost", cost.value},
                       {"reachability_from_cost", implied},
                       {"lemma2_residual", std::abs(*exact - implied)},
                       {"max_reachability", best.values[x0]}};
    const json parameters = {{"theta", config.theta}};
    oracles.push_back({{"quantity", "rsp_reachability"}, {"value", *exact}, {"residual", reach.residual}, {"parameters", parameters}});
    oracles.push_back({{"quantity", "expected_total_cost"}, {"value", cost.value}, {"residual", cost.residual}, {"parameters", parameters}});
    oracles.push_back({{"quantity", "max_reachability"}, {"value", best.values[x0]}, {"residual", 0.0},
                       {"parameters", {{"iterations", best.iterations}, {"tol", 1e-12}}}});
  }
  if (config.mode != EvalMode::Exact) {
    const MonteCarloEstimate mc = simulate_reachability(env.mrp, *env.mrp_policy, params, config.episodes,
                                                        config.seed, config.max_episode_steps);
    report["monte_carlo"] = {{"estimate", mc.mean},
                             {"standard_error", mc.standard_error},
                             {"episodes", mc.episodes},
                             {"capped", mc.capped},
                             {"seed", config.seed},
                             {"seed_scheme", "episode i uses derive_seed(seed, i)"}};
    if (exact) {
      const double diff = std::abs(*exact - mc.mean);
      report["agreement"] = {{"abs_diff", diff}, {"within_3se", diff <= 3.0 * mc.standard_error}};
    }
  }
  report["oracles"] = std::move(oracles);
  return report;
}

namespace {

std::vector<double> theta_from_file(const fs::path& path) {
  const json doc = parse_json_text(read_text_file(path), path.string());
  try {
    return doc.at("theta").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

} // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"LSTD actor-critic for reachability-constrained grid navigation"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);

  // build-env
  BuildEnvConfig build;
  std::string build_out;
  auto* build_cmd = app.add_subcommand("build-env", "Build a grid environment and write its model files");
  build_cmd->add_option("--fixture", build.fixture, "Built-in layout (paper50, lab20)");
  build_cmd->add_option("--grid", build.grid_file, "Grid text file");
  build_cmd->add_option("--roughness", build.roughness_file, "Roughness CSV sidecar");
  build_cmd->add_option("--env_seed", build.env_seed, "Seed for random roughness");
  build_cmd->add_option("--neighborhood_radius", build.neighborhood_radius, "Safety neighbourhood radius r_n");
  build_cmd->add_option("--base_intended", build.slip.base_intended);
  build_cmd->add_option("--lateral_split", build.slip.lateral_split);
  build_cmd->add_option("--back_fraction", build.slip.back_fraction);
  build_cmd->add_option("--roughness_gain", build.slip.roughness_gain);
  build_cmd->add_option("--output", build_out, "Output directory")->required();

  // train: flags override the optional JSON config, which overrides defaults.
  auto* train_cmd = app.add_subcommand("train", "Run LSTD actor-critic training");
  std::string config_file;
  train_cmd->add_option("--config", config_file, "JSON run config (same keys as the flags)");
  json overrides = json::object();
  RunConfig flag_values;
  std::vector<std::pair<CLI::Option*, std::function<void()>>> bindings;
  const auto bind = [&](const std::string& key, auto& target, const std::string& help) {
    CLI::Option* opt = train_cmd->add_option("--" + key, target, help);
    bindings.emplace_back(opt, [&overrides, key, &target] { overrides[key] = target; });
    return opt;
  };
  std::string env_dir;
  std::string out_dir;
  bind("env", env_dir, "Environment directory from build-env");
  bind("output", out_dir, "Output directory");
  bind("env_seed", flag_values.env_seed, "Environment seed (recorded in the manifest)");
  bind("train_seed", flag_values.train_seed, "Training random seed");
  bind("lambda", flag_values.lambda, "Trace decay in [0,1)");
  bind("clip_radius", flag_values.clip_radius, "Gain clip radius D");
  bind("actor_step", flag_values.actor_step, "Actor schedule constant c");
  bind("neighborhood_radius", flag_values.neighborhood_radius, "Safety neighbourhood radius r_n");
  bind("theta0", flag_values.theta0, "Initial theta, comma separated")->delimiter(',');
  bind("ridge_delta", flag_values.ridge_delta, "Ridge added to A");
  bind("actor_warmup_steps", flag_values.actor_warmup_steps, "Steps before the actor starts");
  bind("total_steps", flag_values.total_steps, "Total learner steps");
  bind("checkpoint_every", flag_values.checkpoint_every, "Actor updates between checkpoints");
  bind("max_episode_steps", flag_values.max_episode_steps, "Episode length cap");
  bool trace_reset = false;
  bool fixed_policy = false;
  auto* trace_flag = train_cmd->add_flag("--trace_reset_on_restart", trace_reset, "Reset the trace at every restart");
  auto* fixed_flag = train_cmd->add_flag("--fixed_policy", fixed_policy, "Freeze the actor (beta = 0)");

  // evaluate
  EvaluateConfig eval;
  std::string eval_env;
  std::string theta_file;
  std::string mode = "exact";
  std::string report_file;
  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a policy exactly and/or by simulation");
  eval_cmd->add_option("--env", eval_env, "Environment directory")->required();
  auto* theta_opt = eval_cmd->add_option("--theta", eval.theta, "theta, comma separated")->delimiter(',');
  auto* theta_file_opt = eval_cmd->add_option("--theta_file", theta_file, "theta.json from train");
  theta_opt->excludes(theta_file_opt);
  eval_cmd->add_option("--mode", mode, "exact, monte-carlo or both")
      ->check(CLI::IsMember({"exact", "monte-carlo", "both"}));
  eval_cmd->add_option("--episodes", eval.episodes, "Monte Carlo episodes");
  eval_cmd->add_option("--seed", eval.seed, "Monte Carlo base seed");
  eval_cmd->add_option("--max_episode_steps", eval.max_episode_steps, "Monte Carlo episode cap");
  eval_cmd->add_option("--report", report_file, "Write the report here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*build_cmd) {
      build.output = build_out;
      cmd_build_env(build);
      std::cout << "environment written to " << build_out << "\n";
    } else if (*train_cmd) {
      json doc = config_file.empty() ? json::object() : parse_json_text(read_text_file(config_file), config_file);
      for (auto& [opt, apply] : bindings) {
        if (opt->count() > 0) apply();
      }
      if (trace_flag->count() > 0) overrides["trace_reset_on_restart"] = trace_reset;
      if (fixed_flag->count() > 0) overrides["fixed_policy"] = fixed_policy;
      doc.update(overrides);
      const RunConfig config = RunConfig::from_json(doc);
      const TrainResult result = cmd_train(config);
      std::printf("initial p(x0) = %.6f  final p(x0) = %.6f  max = %.6f  (%zu csv rows)\n",
                  result.initial_reachability, result.final_reachability, result.max_reachability,
                  result.csv_rows);
    } else if (*eval_cmd) {
      eval.env = eval_env;
      if (!theta_file.empty()) eval.theta = theta_from_file(theta_file);
      if (eval.theta.empty()) throw ValidationError("evaluate: give --theta or --theta_file");
      eval.mode = mode == "exact" ? EvalMode::Exact : mode == "both" ? EvalMode::Both : EvalMode::MonteCarlo;
      const json report = cmd_evaluate(eval);
      if (report_file.empty()) {
        std::cout << report.dump(2) << "\n";
      } else {
        write_text_file(report_file, report.dump(2) + "\n");
      }
    }
  } catch (const TrainingAborted& e) {
    std::cerr << "error: " << e.what() << "\n  theta = " << e.params().theta.transpose()
              << "\n  r = " << e.critic().r.transpose() << "\n  k = " << e.critic().k << "\n";
    return kExitNumerical;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::out_of_range& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}

} // namespace lstdac
