#include "fixtures.hpp"
#include "lstdac/gridworld.hpp"

#include <doctest.h>

#include <cmath>
#include <queue>

using namespace lstdac;

namespace {

FiniteMdp two_state() {
  FiniteMdp m(2, 1, 0, 1);
  m.set_available(0, 0, true);
  m.set_row(0, 0, {{0, 0.5}, {1, 0.5}});
  m.set_available(1, 0, true);
  m.set_row(1, 0, {{1, 1.0}});
  return m;
}

// deterministic chain 0 -> 1 -> 2 (terminal)
FiniteMdp chain3() {
  FiniteMdp m(3, 1, 0, 2);
  for (StateIndex x = 0; x < 3; ++x) {
    m.set_available(x, 0, true);
    m.set_row(x, 0, {{std::min<StateIndex>(x + 1, 2), 1.0}});
  }
  return m;
}

// five states, two actions, terminal 4
FiniteMdp five_state_ssp() {
  FiniteMdp m(5, 2, 0, 4);
  const double rows[4][2][5] = {
      {{0.2, 0.5, 0.2, 0.1, 0.0}, {0.1, 0.1, 0.3, 0.3, 0.2}},
      {{0.3, 0.0, 0.4, 0.0, 0.3}, {0.0, 0.6, 0.0, 0.2, 0.2}},
      {{0.1, 0.2, 0.1, 0.3, 0.3}, {0.5, 0.0, 0.0, 0.0, 0.5}},
      {{1.0, 0.0, 0.0, 0.0, 0.0}, {0.4, 0.0, 0.0, 0.2, 0.4}},
  };
  for (StateIndex x = 0; x < 4; ++x) {
    for (ActionIndex u = 0; u < 2; ++u) {
      m.set_available(x, u, true);
      std::vector<Transition> row;
      for (StateIndex j = 0; j < 5; ++j) row.push_back({j, rows[x][u][j]});
      m.set_row(x, u, row);
      m.set_cost(x, u, x == 3 ? 1.0 : 0.0);
    }
  }
  m.set_available(4, 0, true);
  m.set_row(4, 0, {{4, 1.0}});
  return m;
}

std::shared_ptr<BoltzmannPolicy> policy_for(const FiniteMdp& m, std::uint64_t seed) {
  return std::make_shared<BoltzmannPolicy>(fx::random_features(m, 2, seed));
}

} // namespace

TEST_CASE("validate_mdp on stochastic, over-full and leaky rows") {
  CHECK(validate_mdp(two_state()).empty());

  FiniteMdp bad = two_state();
  bad.set_row(0, 0, {{0, 0.5}, {1, 0.6}});
  const auto rep = validate_mdp(bad);
  REQUIRE(rep.size() == 1);
  CHECK(rep[0].rule == "row-sum");
  CHECK(rep[0].state == 0);
  CHECK(rep[0].message == "row sum 1.1 != 1");

  FiniteMdp leaky = two_state();
  leaky.set_row(1, 0, {{1, 0.9}, {0, 0.1}});
  const auto rep2 = validate_mdp(leaky);
  REQUIRE(rep2.size() == 1);
  CHECK(rep2[0].rule == "termination-absorbing");

  FiniteMdp costly = two_state();
  costly.set_cost(1, 0, 2.0);
  REQUIRE(validate_mdp(costly).size() == 1);
  CHECK(validate_mdp(costly)[0].rule == "termination-cost-free");

  FiniteMdp neg = two_state();
  neg.set_row(0, 0, {{0, -0.5}, {1, 1.5}});
  bool saw_range = false;
  for (const auto& v : validate_mdp(neg)) saw_range |= v.rule == "prob-range";
  CHECK(saw_range);

  FiniteMdp nan_cost = two_state();
  nan_cost.set_cost(0, 0, std::nan(""));
  CHECK(validate_mdp(nan_cost)[0].rule == "cost-finite");

  FiniteMdp empty(2, 2, 0);
  empty.set_available(0, 0, true);
  empty.set_row(0, 0, {{1, 1.0}});
  REQUIRE(validate_mdp(empty).size() == 1);
  CHECK(validate_mdp(empty)[0].rule == "no-action");
  CHECK(format_report(validate_mdp(empty)).find("no-action") != std::string::npos);
}

TEST_CASE("set_row sorts, merges and rejects out-of-range successors") {
  FiniteMdp m(3, 1, 0);
  m.set_available(0, 0, true);
  m.set_row(0, 0, {{2, 0.25}, {0, 0.5}, {2, 0.25}, {1, 0.0}});
  const auto r = m.row(0, 0);
  REQUIRE(r.size() == 2);
  CHECK(r[0].next == 0);
  CHECK(r[1].next == 2);
  CHECK(r[1].prob == 0.5);
  CHECK(m.prob(0, 0, 1) == 0.0);
  CHECK_THROWS_AS(m.set_row(0, 0, {{3, 1.0}}), std::out_of_range);
  CHECK_THROWS_AS(m.set_cost(5, 0, 1.0), std::out_of_range);
}

TEST_CASE("assert_proper_reachable") {
  FiniteMdp chain(3, 1, 0);
  for (StateIndex x = 0; x < 3; ++x) {
    chain.set_available(x, 0, true);
    chain.set_row(x, 0, {{std::min<StateIndex>(x + 1, 2), 1.0}});
  }
  const std::vector<StateIndex> goal{2};
  CHECK(assert_proper_reachable(chain, goal));

  FiniteMdp stuck = chain;
  stuck.set_row(1, 0, {{1, 1.0}});
  CHECK_FALSE(assert_proper_reachable(stuck, goal));
  // excluding the trapped state leaves only 0, which can still enter it but
  // reaches the goal with positive probability only through it
  const std::vector<StateIndex> excl{1};
  CHECK_FALSE(assert_proper_reachable(stuck, goal, excl));

  SUBCASE("10x10 grid with a separating unsafe wall") {
    std::string text;
    for (int r = 0; r < 10; ++r) {
      for (int c = 0; c < 10; ++c) {
        char ch = '.';
        if (r == 4) ch = '#';
        if (r == 0 && c == 9) ch = 'G';
        if (r == 9 && c == 0) ch = 'S';
        text += ch;
      }
      text += '\n';
    }
    const MrpProblem grid = build_grid_mdp(load_grid(text));
    CHECK_FALSE(assert_proper_reachable(grid.mdp, grid.goal_states, grid.unsafe_states));

    // BFS oracle on the 4-neighbour graph avoiding '#'
    std::vector<int> seen(100, 0);
    std::queue<int> q;
    q.push(9);
    seen[9] = 1;
    while (!q.empty()) {
      const int c = q.front();
      q.pop();
      const int r = c / 10, col = c % 10;
      const int nb[4][2] = {{r - 1, col}, {r + 1, col}, {r, col - 1}, {r, col + 1}};
      for (auto& p : nb) {
        if (p[0] < 0 || p[0] > 9 || p[1] < 0 || p[1] > 9) continue;
        const int j = p[0] * 10 + p[1];
        if (seen[j] || text[static_cast<std::size_t>(p[0] * 11 + p[1])] == '#') continue;
        seen[j] = 1;
        q.push(j);
      }
    }
    CHECK(seen[90] == 0);

    text[4 * 11 + 5] = '.';  // open a gap
    const MrpProblem open = build_grid_mdp(load_grid(text));
    CHECK(assert_proper_reachable(open.mdp, open.goal_states, open.unsafe_states));
  }
}

TEST_CASE("sample_transition") {
  FiniteMdp m(4, 2, 0);
  m.set_available(0, 0, true);
  m.set_row(0, 0, {{3, 1.0}});
  m.set_available(0, 1, true);
  m.set_row(0, 1, {{0, 0.25}, {1, 0.25}, {2, 0.25}, {3, 0.25}});
  Rng rng(7);
  for (int i = 0; i < 100; ++i) CHECK(sample_transition(m, 0, 0, rng) == 3);

  Rng a(99), b(99);
  for (int i = 0; i < 50; ++i) CHECK(sample_transition(m, 0, 1, a) == sample_transition(m, 0, 1, b));

  // 10^6 draws; 3 sigma of a binomial(1e6, 0.25) frequency is 0.0013 < 0.005
  Rng big(2024);
  std::vector<int> counts(4, 0);
  const int n = 1000000;
  for (int i = 0; i < n; ++i) ++counts[sample_transition(m, 0, 1, big)];
  for (int c : counts) CHECK(std::abs(c / double(n) - 0.25) <= 0.005);

  CHECK_THROWS_AS(sample_transition(m, 1, 0, rng), std::invalid_argument);
}

TEST_CASE("empirical transition frequencies on a skewed row") {
  FiniteMdp m(3, 1, 0);
  m.set_available(0, 0, true);
  m.set_row(0, 0, {{0, 0.7}, {1, 0.2}, {2, 0.1}});
  Rng rng(5);
  std::vector<int> counts(3, 0);
  const int n = 1000000;
  for (int i = 0; i < n; ++i) ++counts[sample_transition(m, 0, 0, rng)];
  for (StateIndex j = 0; j < 3; ++j) {
    const double p = m.prob(0, 0, j);
    CHECK(std::abs(counts[j] / double(n) - p) <= 3.0 * std::sqrt(p * (1 - p) / n) + 1e-12);
  }
}

TEST_CASE("sample_trajectory basics") {
  const FiniteMdp m = chain3();
  auto pol = policy_for(m, 1);
  const PolicyParams th{0.0, 0.0};
  Rng rng(1);
  const Trajectory t = sample_trajectory(m, *pol, th, rng);
  CHECK(t.steps.size() == 2);
  CHECK(t.terminated);
  CHECK(t.final_state == 2);
  CHECK(t.steps[0].state == 0);
  CHECK(t.steps[1].state == 1);

  const Trajectory none = sample_trajectory(m, *pol, th, rng, 0);
  CHECK(none.steps.empty());
  CHECK_FALSE(none.terminated);

  CHECK_THROWS_AS(sample_trajectory(m, *pol, PolicyParams{1.0}, rng), std::invalid_argument);
  FiniteMdp noterm = m;
  noterm.set_termination_state(std::nullopt);
  CHECK_THROWS_AS(sample_trajectory(noterm, *pol, th, rng), std::invalid_argument);
}

TEST_CASE("trajectory reproducibility") {
  const FiniteMdp m = five_state_ssp();
  auto pol = policy_for(m, 3);
  const PolicyParams th{0.7, -1.3};
  for (std::uint64_t seed : {1ULL, 2ULL, 12345ULL}) {
    Rng a(seed), b(seed);
    CHECK(sample_trajectory(m, *pol, th, a) == sample_trajectory(m, *pol, th, b));
  }
}

TEST_CASE("mean episode length matches exact hitting time") {
  const FiniteMdp m = five_state_ssp();
  REQUIRE(validate_mdp(m).empty());
  auto pol = policy_for(m, 11);
  const PolicyParams th{1.5, -0.5};

  // E[T] from (I - P_TT) t = 1 on transient states
  const Eigen::MatrixXd P = fx::dense_policy_matrix(m, *pol, th);
  const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(4, 4) - P.topLeftCorner(4, 4);
  const Eigen::VectorXd hit = M.partialPivLu().solve(Eigen::VectorXd::Ones(4));

  Rng rng(77);
  const int n = 10000;
  double sum = 0.0, sq = 0.0;
  int terminated = 0;
  for (int i = 0; i < n; ++i) {
    const Trajectory t = sample_trajectory(m, *pol, th, rng);
    const double len = static_cast<double>(t.steps.size());
    sum += len;
    sq += len * len;
    terminated += t.terminated;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sq / n - mean * mean) / n);
  CHECK(terminated == n);
  CHECK(std::abs(mean - hit[0]) <= 3.0 * se);

  // termination fraction at max_steps = 50 |X|
  int done = 0;
  for (int i = 0; i < n; ++i) done += sample_trajectory(m, *pol, th, rng, 50 * 5).terminated;
  CHECK(done >= 0.999 * n);
}

TEST_CASE("total_cost sums step costs") {
  Trajectory t;
  t.steps = {{0, 0, 0.0}, {3, 1, 1.0}, {0, 0, 0.0}, {3, 0, 1.0}};
  CHECK(t.total_cost() == 2.0);
}

TEST_CASE("rng categorical and derive_seed") {
  Rng rng(3);
  const std::vector<double> p{0.0, 0.0, 1.0};
  for (int i = 0; i < 20; ++i) CHECK(rng.categorical(p) == 2);
  const std::vector<double> zero{0.0, 0.0};
  CHECK_THROWS_AS(rng.categorical(zero), std::invalid_argument);
  // slack: entries summing slightly below one still return a positive index
  const std::vector<double> shy{0.5, 0.5 - 1e-15, 0.0};
  for (int i = 0; i < 1000; ++i) CHECK(rng.categorical(shy) < 2);
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
  CHECK(derive_seed(5, 9) == derive_seed(5, 9));
  // uniform draws are in [0, 1)
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK((u >= 0.0 && u < 1.0));
  }
}
