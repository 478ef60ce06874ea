// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include "fixtures.hpp"
#include "lstdac/actor_critic.hpp"
#include "lstdac/cli.hpp"
#include "lstdac/oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <unistd.h>

using namespace lstdac;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, const char* name, bool ok, const std::string& detail) {
  std::printf("%s %d %s: %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  failures += !ok;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

struct Fixture {
  MrpProblem mrp;
  SspProblem ssp;
  std::shared_ptr<BoltzmannPolicy> mrp_pol, ssp_pol;
};

Fixture random_fixture(std::uint64_t seed, std::size_t safe, std::size_t goals, std::size_t unsafe,
                       std::size_t actions) {
  Fixture f;
  f.mrp = fx::random_mrp(seed, safe, goals, unsafe, actions);
  f.ssp = mrp_to_ssp(f.mrp);
  auto base = fx::random_features(f.mrp.mdp, 2, seed ^ 0x5bd1e995);
  f.mrp_pol = std::make_shared<BoltzmannPolicy>(base);
  f.ssp_pol = std::make_shared<BoltzmannPolicy>(std::make_shared<SspFeatureAdapter>(base, f.ssp));
  return f;
}

void criterion1() {
  Rng rng(101);
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    const Fixture f = random_fixture(seed, 2 + seed % 6, 1 + seed % 3, 1 + seed % 3, 2 + seed % 3);
    const PolicyParams th(fx::random_theta(rng, 2, 3.0));
    const double reach = rsp_reachability(f.mrp, *f.mrp_pol, th).values[0];
    const double alpha = expected_total_cost(f.ssp, *f.ssp_pol, th).value;
    worst = std::max(worst, std::abs(reach - reachability_from_cost(alpha)));
  }
  report(1, "reach-cost-identity", worst <= 1e-8, fmt("25 random MRPs, max |R - 1/(alpha+1)| = %.3g (tol 1e-8)", worst));
}

void criterion2() {
  Rng rng(202);
  double worst_fd = 0.0, worst_mean = 0.0;
  const Fixture f = random_fixture(7, 12, 1, 2, 4);
  for (int draw = 0; draw < 1000; ++draw) {
    const Eigen::VectorXd theta = fx::random_theta(rng, 2, 4.0);
    const PolicyParams th(theta);
    const StateIndex x = rng.next_u64() % 12;
    worst_mean = std::max(worst_mean, expected_policy_score(*f.mrp_pol, th, x).cwiseAbs().maxCoeff());
    for (ActionIndex u : f.mrp.mdp.available_actions(x)) {
      const Eigen::VectorXd psi = f.mrp_pol->psi(th, x, u);
      for (Eigen::Index i = 0; i < 2; ++i) {
        Eigen::VectorXd up = theta, dn = theta;
        up[i] += 1e-6;
        dn[i] -= 1e-6;
        const double fd = (f.mrp_pol->log_prob(PolicyParams(up), x, u) - f.mrp_pol->log_prob(PolicyParams(dn), x, u)) / 2e-6;
        worst_fd = std::max(worst_fd, std::abs(psi[i] - fd));
      }
    }
  }
  report(2, "score-function", worst_fd <= 1e-6 && worst_mean <= 1e-10,
         fmt("1000 draws, max |psi - FD| = %.3g (tol 1e-6), max |E psi| = %.3g (tol 1e-10)", worst_fd, worst_mean));
}

void criterion3() {
  // three safe states + unsafe + termination = 5 SSP states
  const Fixture f = random_fixture(5, 3, 1, 1, 3);
  const PolicyParams th{0.5, -0.8};
  LearnerConfig cfg;
  cfg.actor_enabled = false;
  TrainingOptions opt;
  opt.total_steps = 200000;
  const std::uint64_t burn_in = 20000;
  Eigen::VectorXd direction = Eigen::VectorXd::Zero(2);
  std::uint64_t samples = 0;
  std::vector<Eigen::VectorXd> r_trace;
  r_trace.reserve(opt.total_steps);
  opt.on_step = [&](const CriticState& cs, const Eigen::VectorXd& psi_next) {
    r_trace.push_back(cs.r);
    if (cs.k <= burn_in) return;
    direction += gain_clip(cs.r, cfg.clip_radius) * cs.r.dot(psi_next) * psi_next;
    ++samples;
  };
  Rng rng(303);
  run_training(f.ssp, *f.ssp_pol, th, cfg, rng, opt);
  direction /= static_cast<double>(samples);
  const Eigen::VectorXd grad = policy_gradient_fd(f.ssp, *f.ssp_pol, th);
  const double cos = cosine_similarity(direction, grad);

  double sd[3];
  for (int w = 0; w < 3; ++w) {
    const std::size_t begin = r_trace.size() - static_cast<std::size_t>(3 - w) * 10000;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(2), sq = Eigen::VectorXd::Zero(2);
    for (std::size_t k = begin; k < begin + 10000; ++k) {
      mean += r_trace[k];
      sq += r_trace[k].cwiseProduct(r_trace[k]);
    }
    mean /= 10000.0;
    sq /= 10000.0;
    sd[w] = std::sqrt((sq - mean.cwiseProduct(mean)).cwiseMax(0.0).sum());
  }
  const bool decreasing = sd[0] > sd[1] && sd[1] > sd[2];

  // Diagnostic only: the same window statistic averaged over 20 independent
  // streams, which shows the trend a single run is too noisy to resolve.
  double mean_sd[3] = {0.0, 0.0, 0.0};
  const int reps = 20;
  for (int rep = 0; rep < reps; ++rep) {
    std::vector<Eigen::VectorXd> tail;
    TrainingOptions o;
    o.total_steps = opt.total_steps;
    o.on_step = [&](const CriticState& cs, const Eigen::VectorXd&) {
      if (cs.k > opt.total_steps - 30000) tail.push_back(cs.r);
    };
    Rng r(derive_seed(303, static_cast<std::uint64_t>(rep)));
    run_training(f.ssp, *f.ssp_pol, th, cfg, r, o);
    for (int w = 0; w < 3; ++w) {
      Eigen::VectorXd mean = Eigen::VectorXd::Zero(2), sq = Eigen::VectorXd::Zero(2);
      for (std::size_t k = static_cast<std::size_t>(w) * 10000; k < static_cast<std::size_t>(w + 1) * 10000; ++k) {
        mean += tail[k];
        sq += tail[k].cwiseProduct(tail[k]);
      }
      mean /= 10000.0;
      sq /= 10000.0;
      mean_sd[w] += std::sqrt((sq - mean.cwiseProduct(mean)).cwiseMax(0.0).sum()) / reps;
    }
  }
  std::printf("INFO 3 window sd averaged over %d streams: %.3g, %.3g, %.3g\n", reps, mean_sd[0], mean_sd[1], mean_sd[2]);

  report(3, "critic-direction", cos >= 0.95 && decreasing,
         fmt("cosine(avg actor direction, FD grad) = %.6f (>= 0.95); ", cos) +
             fmt("window sd of r = %.3g, %.3g, %.3g (must strictly decrease)", sd[0], sd[1], sd[2]));
}

void criterion4() {
  double worst = 0.0;
  std::vector<std::pair<const Fixture*, PolicyParams>> cases;
  std::vector<Fixture> fixtures;
  for (std::uint64_t seed = 1; seed <= 6; ++seed) fixtures.push_back(random_fixture(seed * 3, 4, 1, 2, 3));
  Rng rng(404);
  const auto check = [&](const SspProblem& ssp, const Rsp& rsp, const PolicyParams& th) {
    const StationaryDistribution st = stationary_distribution(ssp, rsp, th);
    const QTable q = q_values(ssp, rsp, th);
    const auto psi = psi_tables(rsp, th);
    const Projection pr = project_q(q.q, psi, st.eta);
    for (const auto& p : psi) {
      worst = std::max(worst, std::abs(weighted_inner_product(q.q - pr.projected, p, st.eta)));
      worst = std::max(worst, std::abs(weighted_inner_product(q.q, p, st.eta) -
                                       weighted_inner_product(pr.projected, p, st.eta)));
    }
  };
  for (const auto& f : fixtures) check(f.ssp, *f.ssp_pol, PolicyParams(fx::random_theta(rng, 2, 2.0)));
  GridSpec g = fixture_grid("lab20");
  assign_random_roughness(g, 1);
  const Environment env = make_environment(g);
  check(env.ssp, *env.ssp_policy, PolicyParams{50.0, -10.0});
  check(env.ssp, *env.ssp_policy, PolicyParams{2.0, -1.0});
  report(4, "projection-identities", worst <= 1e-8,
         fmt("6 random SSPs + lab20 at 2 thetas, max |<Q - PiQ, psi>|, |<Q,psi> - <PiQ,psi>| = %.3g (tol 1e-8)", worst));
}

void criterion5() {
  const std::uint64_t n = 1000000;
  double worst_z = 0.0;
  int checks = 0;
  Rng thetas(505);
  for (std::uint64_t seed : {11ULL, 12ULL, 13ULL}) {
    const Fixture f = random_fixture(seed, 3, 1, 1, 2);
    const PolicyParams th(fx::random_theta(thetas, 2, 2.0));
    const double exact = rsp_reachability(f.mrp, *f.mrp_pol, th).values[0];
    const MonteCarloEstimate mc = simulate_reachability(f.mrp, *f.mrp_pol, th, n, seed * 1000, 100000);
    worst_z = std::max(worst_z, std::abs(exact - mc.mean) / mc.standard_error);
    ++checks;

    const QTable q = q_values(f.ssp, *f.ssp_pol, th);
    const StateIndex term = f.ssp.termination_state();
    Rng rng(seed * 7777);
    for (ActionIndex u0 : f.ssp.mdp.available_actions(0)) {
      double sum = 0.0, sq = 0.0;
      for (std::uint64_t i = 0; i < n; ++i) {
        StateIndex x = 0;
        ActionIndex u = u0;
        double ret = 0.0;
        while (x != term) {
          ret += f.ssp.mdp.cost(x, u);
          x = sample_transition(f.ssp.mdp, x, u, rng);
          const Eigen::VectorXd mu = f.ssp_pol->action_probs(th, x);
          u = rng.categorical({mu.data(), static_cast<std::size_t>(mu.size())});
        }
        sum += ret;
        sq += ret * ret;
      }
      const double mean = sum / static_cast<double>(n);
      const double se = std::sqrt((sq / static_cast<double>(n) - mean * mean) / static_cast<double>(n));
      worst_z = std::max(worst_z, std::abs(mean - q.q(0, static_cast<Eigen::Index>(u0))) / se);
      ++checks;
    }
  }
  report(5, "exact-vs-monte-carlo", worst_z <= 3.0,
         fmt("%.0f checks (reachability + Q(x0,.)) on 3 fixtures, 1e6 episodes each, max |z| = %.3f (<= 3)", checks, worst_z));
}

void criterion6() {
  const auto t0 = std::chrono::steady_clock::now();
  char tmpl[] = "/tmp/lstdac_acc_XXXXXX";
  const fs::path dir = mkdtemp(tmpl);
  BuildEnvConfig b;
  b.fixture = "lab20";
  b.env_seed = 1;
  b.neighborhood_radius = 2;
  b.output = dir / "env";
  cmd_build_env(b);

  RunConfig cfg;
  cfg.env = b.output;
  cfg.env_seed = 1;
  cfg.train_seed = 1;
  cfg.lambda = 0.9;
  cfg.clip_radius = 5.0;
  cfg.actor_step = 0.05;
  cfg.theta0 = {50.0, -10.0};
  cfg.neighborhood_radius = 2;
  cfg.total_steps = 1000000;
  cfg.checkpoint_every = 100000;
  cfg.output = dir / "run";
  const TrainResult res = cmd_train(cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double last = *res.history.records.back().exact_reach;
  const bool ok = last >= 0.85 * res.max_reachability && last > res.initial_reachability && secs < 600.0;
  std::string detail = fmt("p(x0): initial %.12f -> final %.12f, max %.12f; ", res.initial_reachability, last,
                           res.max_reachability);
  detail += fmt("ratio %.4f (>= 0.85), gain %.3g, ", last / res.max_reachability, last - res.initial_reachability);
  detail += fmt("theta = (%.9f, %.9f), ", res.history.final_params.theta[0], res.history.final_params.theta[1]);
  detail += fmt("%.1f s", secs);
  report(6, "lab20-training", ok, detail);
  fs::remove_all(dir);
}

void criterion7() {
  int bad = 0, total = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const MrpProblem m = fx::random_mrp(seed, 1 + seed % 8, 1 + seed % 3, seed % 4, 1 + seed % 4);
    bad += !validate_mdp(mrp_to_ssp(m).mdp).empty();
    ++total;
  }
  for (const char* name : {"lab20", "paper50"}) {
    GridSpec g = fixture_grid(name);
    assign_random_roughness(g, 9);
    bad += !validate_mdp(mrp_to_ssp(build_grid_mdp(g)).mdp).empty();
    ++total;
  }
  bool monotone = true;
  for (std::uint64_t k = 3; k < 1000000; ++k) {
    monotone &= beta_schedule(k + 1, 0.05) / gamma_schedule(k + 1) <= beta_schedule(k, 0.05) / gamma_schedule(k);
  }
  const double ratio = beta_schedule(100000, 0.05) / gamma_schedule(100000);
  report(7, "ssp-validity-and-schedules", bad == 0 && monotone && ratio < 0.005,
         fmt("%.0f transformed models, %.0f invalid; beta/gamma non-increasing for 3 <= k <= 1e6: ", total, bad) +
             (monotone ? "yes" : "no") + fmt("; beta/gamma at 1e5 = %.6f (< 0.005)", ratio));
}

void criterion8() {
  char tmpl[] = "/tmp/lstdac_det_XXXXXX";
  const fs::path dir = mkdtemp(tmpl);
  BuildEnvConfig b;
  b.fixture = "lab20";
  b.env_seed = 5;
  b.output = dir / "env";
  cmd_build_env(b);
  RunConfig cfg;
  cfg.env = b.output;
  cfg.total_steps = 50000;
  cfg.checkpoint_every = 1000;
  cfg.train_seed = 77;
  cfg.output = dir / "a";
  cmd_train(cfg);
  cfg.output = dir / "b";
  cmd_train(cfg);
  const std::string a = read_text_file(dir / "a" / "history.csv");
  const std::string c = read_text_file(dir / "b" / "history.csv");
  report(8, "deterministic-csv", a == c && !a.empty(),
         fmt("two runs, %.0f bytes each, identical: ", static_cast<double>(a.size())) + (a == c ? "yes" : "no"));
  fs::remove_all(dir);
}

} // namespace

int main(int argc, char** argv) {
  const std::pair<const char*, void (*)()> criteria[] = {
      {"reach-cost-identity", criterion1},       {"score-function", criterion2},
      {"critic-direction", criterion3},      {"projection-identities", criterion4},
      {"exact-vs-monte-carlo", criterion5},  {"lab20-training", criterion6},
      {"ssp-validity-and-schedules", criterion7}, {"deterministic-csv", criterion8},
  };
  // no argument runs all criteria, otherwise only the numbered one
  const int only = argc > 1 ? std::atoi(argv[1]) : 0;
  if (only < 0 || only > 8) {
    std::fprintf(stderr, "usage: acceptance [1-8]\n");
    return 2;
  }
  int id = 1, ran = 0;
  for (const auto& [name, fn] : criteria) {
    if (only == 0 || only == id) {
      try {
        fn();
      } catch (const std::exception& e) {
        report(id, name, false, std::string("exception: ") + e.what());
      }
      ++ran;
    }
    ++id;
  }
  std::printf("%d of %d criteria passed\n", ran - failures, ran);
  return failures == 0 ? 0 : 1;
}
