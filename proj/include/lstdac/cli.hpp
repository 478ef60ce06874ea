#pragma once

#include "lstdac/actor_critic.hpp"
#include "lstdac/boltzmann.hpp"
#include "lstdac/gridworld.hpp"
#include "lstdac/mdp_io.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace lstdac {

/// Process exit codes.
enum ExitCode : int { kExitOk = 0, kExitValidation = 2, kExitNumerical = 3, kExitIo = 4 };

/// A grid environment with both problem forms and matching policies.
struct Environment {
  GridSpec spec;
  MrpProblem mrp;
  SspProblem ssp;
  std::shared_ptr<const GridFeatures> features;
  /// Policy over grid cells (MRP indices).
  std::shared_ptr<const BoltzmannPolicy> mrp_policy;
  /// Same policy lifted to SSP indices.
  std::shared_ptr<const BoltzmannPolicy> ssp_policy;
};

Environment make_environment(const GridSpec& spec);

struct BuildEnvConfig {
  /// Built-in layout name, or empty when `grid_file` is used.
  std::string fixture;
  std::filesystem::path grid_file;
  /// Optional roughness sidecar; otherwise roughness is drawn from env_seed.
  std::filesystem::path roughness_file;
  std::uint64_t env_seed = 1;
  std::size_t neighborhood_radius = 2;
  SlipModel slip;
  std::filesystem::path output;
};

/// Writes grid.txt, roughness.csv, mrp.json, ssp.json, origin_map.json and
/// env.json (provenance) into config.output.
void cmd_build_env(const BuildEnvConfig& config);

/// Reads an environment directory written by cmd_build_env. The stored
/// mrp.json must match the model rebuilt from the grid.
Environment load_environment(const std::filesystem::path& dir,
                             std::optional<std::size_t> radius_override = std::nullopt);

struct RunConfig {
  std::filesystem::path env;
  std::uint64_t env_seed = 1;
  std::uint64_t train_seed = 1;
  double lambda = 0.9;
  double clip_radius = 5.0;
  double actor_step = 0.05;
  std::size_t neighborhood_radius = 2;
  std::vector<double> theta0{50.0, -10.0};
  double ridge_delta = 1e-6;
  std::size_t actor_warmup_steps = 100;
  bool trace_reset_on_restart = false;
  bool fixed_policy = false;
  std::uint64_t total_steps = 200000;
  std::uint64_t checkpoint_every = 10000;
  std::size_t max_episode_steps = 100000;
  std::filesystem::path output;

  json to_json() const;
  /// Missing keys keep their defaults; unknown keys are rejected.
  static RunConfig from_json(const json& doc);
  LearnerConfig learner() const;
  void validate() const;
};

struct TrainResult {
  TrainingHistory history;
  double max_reachability = 0.0;
  double initial_reachability = 0.0;
  double final_reachability = 0.0;
  std::size_t csv_rows = 0;
};

/// Runs training and writes history.csv, theta.json and manifest.json.
TrainResult cmd_train(const RunConfig& config);

enum class EvalMode { Exact, MonteCarlo, Both };

struct EvaluateConfig {
  std::filesystem::path env;
  std::vector<double> theta;
  EvalMode mode = EvalMode::Exact;
  std::uint64_t episodes = 100000;
  std::uint64_t seed = 1;
  std::size_t max_episode_steps = 100000;
};

/// Report with p_theta(x0), expected total cost, the cost/reachability
/// cross-check residual and, for Monte Carlo modes, estimate and standard error.
json cmd_evaluate(const EvaluateConfig& config);

struct MonteCarloEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  std::uint64_t episodes = 0;
  std::uint64_t capped = 0;
};

/// Fraction of episodes from x0 that hit a goal before an unsafe state.
/// Episode i uses its own stream seeded with derive_seed(seed, i).
MonteCarloEstimate simulate_reachability(const MrpProblem& problem, const Rsp& rsp,
                                         const PolicyParams& params, std::uint64_t episodes,
                                         std::uint64_t seed, std::size_t max_steps);

/// Version string recorded in manifests.
std::string version_string();

/// Dispatches `build-env`, `train` and `evaluate`; returns the exit code.
int run_cli(int argc, char** argv);

} // namespace lstdac
