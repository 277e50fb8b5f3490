#include <doctest.h>

#include <chrono>

#include "bridge.hpp"
#include "gnb/environments.hpp"
#include "gnb/gnb_policy.hpp"

using namespace gnb;

namespace {

PolicyConfig small_config(std::uint64_t seed = 1) {
  PolicyConfig c;
  c.width = 8;
  c.depth = 2;
  c.pool_size = 8;
  c.gnn_pool_size = 8;
  c.steps1 = 3;
  c.steps2 = 3;
  c.eta1 = 1e-3;
  c.eta2 = 1e-4;
  c.train_burnin = 20;
  c.train_every = 5;
  c.seed = seed;
  return c;
}

SyntheticConfig small_env(Index users = 6, std::uint64_t seed = 3) {
  SyntheticConfig e;
  e.users = users;
  e.dim = 4;
  e.arms = 4;
  e.seed = seed;
  return e;
}

std::vector<std::size_t> drive(Policy& policy, SyntheticEnv& env, int rounds) {
  std::vector<std::size_t> chosen;
  for (int t = 0; t < rounds; ++t) {
    const auto r = env.next_round();
    const auto d = policy.recommend(r.user, r.arms);
    policy.observe(r.user, d, env.reward(d.chosen_index));
    policy.maybe_train();
    chosen.push_back(d.chosen_index);
  }
  return chosen;
}

}  // namespace

TEST_CASE("select_arm contract") {
  CHECK(select_arm({{0.3, 5.0}}, 1.0).chosen_index == 0);
  const auto tie = select_arm({{0.5, 0.1}, {0.5, 0.1}, {0.2, 0.0}}, 1.0);
  CHECK(tie.chosen_index == 0);
  CHECK(tie.tie_broken);
  CHECK(select_arm({{0.1, 0.0}, {0.2, 0.0}, {0.15, 0.0}}, 1.0).chosen_index == 1);
  // alpha = 0 ignores the gain entirely
  CHECK(select_arm({{0.1, 9.0}, {0.2, 0.0}}, 0.0).chosen_index == 1);
  CHECK_THROWS_AS(select_arm({}, 1.0), validation_error);
}

TEST_CASE("argmax is invariant to a constant shift of all scores") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ArmScore> a(5), b(5);
    const double c = 10.0 * normal(rng);
    for (std::size_t i = 0; i < 5; ++i) {
      a[i] = {normal(rng), normal(rng)};
      b[i] = {a[i].reward + c, a[i].gain};
    }
    CHECK(select_arm(a, 0.7).chosen_index == select_arm(b, 0.7).chosen_index);
  }
}

TEST_CASE("training schedule") {
  for (std::int64_t t = 1; t <= 1000; ++t) CHECK(should_train(t, 1000, 100));
  CHECK_FALSE(should_train(1050, 1000, 100));
  CHECK(should_train(1100, 1000, 100));
  CHECK_FALSE(should_train(0, 1000, 100));
  // train_every = 1 trains every round
  for (std::int64_t t = 1; t <= 50; ++t) CHECK(should_train(t, 0, 1));
}

TEST_CASE("single candidate is always chosen") {
  GnbPolicy p(small_config(), 4, 3);
  std::vector<VectorXd> arms{VectorXd::Unit(3, 1)};
  CHECK(p.recommend(2, arms).chosen_index == 0);
}

TEST_CASE("recommend rejects bad candidates and normalizes off-unit contexts") {
  GnbPolicy p(small_config(), 4, 3);
  CHECK_THROWS_AS(p.recommend(0, std::vector<VectorXd>{}), validation_error);
  CHECK_THROWS_AS(p.recommend(0, std::vector<VectorXd>{VectorXd::Zero(3)}), validation_error);
  CHECK_THROWS_AS(p.recommend(0, std::vector<VectorXd>{VectorXd::Ones(2)}), shape_error);
  CHECK_THROWS_AS(p.recommend(4, std::vector<VectorXd>{VectorXd::Ones(3)}), validation_error);
  const auto d = p.recommend(0, std::vector<VectorXd>{VectorXd::Constant(3, 2.0)});
  CHECK(d.normalized_input);
  p.observe(0, d, 1.0);
  CHECK(std::abs(p.log().back().context.norm() - 1.0) < 1e-12);
}

TEST_CASE("observe bookkeeping and reward range") {
  GnbPolicy p(small_config(), 4, 3);
  std::vector<VectorXd> arms{VectorXd::Unit(3, 0), VectorXd::Unit(3, 1), VectorXd::Unit(3, 2)};
  auto d = p.recommend(1, arms);
  CHECK_THROWS_AS(p.observe(1, d, 1.5), validation_error);
  CHECK_THROWS_AS(p.observe(2, d, 1.0), validation_error);
  p.observe(1, d, 0.0);
  CHECK(p.log().size() == 1);
  CHECK(p.round() == 1);
  CHECK(p.log().back().served_reward == d.scores[d.chosen_index].reward);
  CHECK(p.log().back().served_gain == d.scores[d.chosen_index].gain);
  CHECK_THROWS_AS(p.observe(1, d, 1.0), validation_error);  // nothing pending
  d = p.recommend(3, arms);
  p.observe(3, d, 1.0);
  CHECK(p.log().size() == 2);
  CHECK(p.users()[3].history.size() == 1);
  CHECK(p.users()[3].history.back().served_prediction == predict_reward(p.users()[3], arms[d.chosen_index]));
}

TEST_CASE("maybe_train with no history is a no-op") {
  GnbPolicy p(small_config(), 4, 3);
  CHECK_FALSE(p.maybe_train());
  CHECK(p.params_version() == 0);
}

TEST_CASE("training touches only the served user's networks") {
  GnbPolicy p(small_config(), 5, 4);
  SyntheticEnv env(small_env(5));
  const auto r = env.next_round();
  const auto d = p.recommend(r.user, r.arms);
  const auto before = p.users();
  const auto gnn_before = p.gnn_exploit();
  p.observe(r.user, d, env.reward(d.chosen_index));
  CHECK(p.maybe_train());
  for (Index u = 0; u < 5; ++u) {
    const auto& now = p.users()[static_cast<std::size_t>(u)];
    const auto& old = before[static_cast<std::size_t>(u)];
    if (u == r.user) {
      CHECK_FALSE(now.exploit == old.exploit);
    } else {
      CHECK(now.exploit == old.exploit);
      CHECK(now.explore == old.explore);
    }
  }
  CHECK_FALSE(p.gnn_exploit() == gnn_before);
  CHECK(p.params_version() == 1);
}

TEST_CASE("same seed, same decisions") {
  GnbPolicy a(small_config(7), 6, 4), b(small_config(7), 6, 4);
  SyntheticEnv ea(small_env()), eb(small_env());
  CHECK(drive(a, ea, 60) == drive(b, eb, 60));
  CHECK(a.gnn_exploit() == b.gnn_exploit());
}

TEST_CASE("n_tilde = n is decision-identical to the unrestricted policy") {
  auto full = small_config(9);
  auto restricted = full;
  restricted.n_tilde = 6;
  GnbPolicy a(full, 6, 4), b(restricted, 6, 4);
  SyntheticEnv ea(small_env()), eb(small_env());
  CHECK(drive(a, ea, 100) == drive(b, eb, 100));
  CHECK(a.gnn_exploit() == b.gnn_exploit());
}

TEST_CASE("n_tilde = 1 degenerates to single-user scoring") {
  auto c = small_config();
  c.n_tilde = 1;
  GnbPolicy p(c, 6, 4);
  SyntheticEnv env(small_env());
  const auto chosen = drive(p, env, 30);
  for (auto i : chosen) CHECK(i < 4);
  CHECK(p.last_members().size() == 1);
  // propagation rows put all mass on the target: 1x1 graph of weight 1 normalizes to 1
  for (const auto& rec : p.log()) {
    CHECK(rec.exploit_propagation(rec.user) == 1.0);
    CHECK(rec.exploit_propagation.sum() == 1.0);
  }
}

TEST_CASE("large population with a small neighborhood stays cheap") {
  auto c = small_config();
  c.n_tilde = 50;
  GnbPolicy p(c, 500, 4);
  SyntheticEnv env(small_env(500));
  const auto start = std::chrono::steady_clock::now();
  drive(p, env, 5);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(p.last_members().size() == 50);
  CHECK(seconds < 5.0);
}

TEST_CASE("greedy ablation matches alpha = 0 decision for decision") {
  auto c = small_config(11);
  c.alpha = 0.0;
  GnbPolicy greedy(c, 6, 4, true), zero_alpha(c, 6, 4, false);
  SyntheticEnv ea(small_env()), eb(small_env());
  CHECK(drive(greedy, ea, 80) == drive(zero_alpha, eb, 80));
  CHECK(greedy.name() == "greedy_gnb");
}

TEST_CASE("alpha = 0 picks the arm with the largest estimated reward") {
  auto c = small_config(13);
  c.alpha = 0.0;
  GnbPolicy p(c, 6, 4);
  SyntheticEnv env(small_env());
  drive(p, env, 25);
  const auto r = env.next_round();
  const auto d = p.recommend(r.user, r.arms);
  std::size_t best = 0;
  for (std::size_t i = 1; i < d.scores.size(); ++i)
    if (d.scores[i].reward > d.scores[best].reward) best = i;
  CHECK(d.chosen_index == best);
}

TEST_CASE("stored training labels use serve-time estimates") {
  auto c = small_config(15);
  GnbPolicy p(c, 6, 4);
  SyntheticEnv env(small_env());
  std::vector<double> served;
  for (int t = 0; t < 80; ++t) {
    const auto r = env.next_round();
    const auto d = p.recommend(r.user, r.arms);
    served.push_back(d.scores[d.chosen_index].reward);
    p.observe(r.user, d, env.reward(d.chosen_index));
    p.maybe_train();
  }
  const auto& log = p.log();
  const auto explore_labels = p.explore_dataset().labels();
  const auto exploit_labels = p.exploit_dataset().labels();
  for (std::size_t i = 0; i < log.size(); ++i) {
    CHECK(log[i].served_reward == served[i]);
    CHECK(explore_labels(static_cast<Index>(i)) == log[i].reward - served[i]);
    CHECK(exploit_labels(static_cast<Index>(i)) == log[i].reward);
    CHECK(log[i].params_version <= static_cast<std::uint64_t>(i));
  }
  for (const auto& u : p.users()) {
    const VectorXd labels = exploration_labels(u);
    for (std::size_t i = 0; i < u.history.size(); ++i)
      CHECK(labels(static_cast<Index>(i)) == u.history[i].reward - u.history[i].served_prediction);
  }
}

TEST_CASE("uniform-snapshot and cold-start modes run") {
  auto c = small_config(17);
  c.snapshot = SnapshotMode::uniform_snapshot;
  c.start = StartMode::cold;
  c.snapshot_cap = 4;
  GnbPolicy p(c, 6, 4);
  SyntheticEnv env(small_env());
  drive(p, env, 40);
  CHECK(p.round() == 40);
  for (const auto& u : p.users()) CHECK(u.snapshots.size() <= 4);
}

TEST_CASE("checkpoint round-trip resumes bit-exactly") {
  auto c = small_config(19);
  c.snapshot = SnapshotMode::uniform_snapshot;
  c.n_tilde = 4;
  GnbPolicy a(c, 6, 4);
  SyntheticEnv env(small_env());
  drive(a, env, 30);
  const auto saved = a.save();
  const auto env_saved = env.save();
  const auto tail_a = drive(a, env, 30);

  GnbPolicy b(small_config(0), 6, 4);
  b.load(nlohmann::json::parse(saved.dump()));
  SyntheticEnv env_b(small_env());
  env_b.load(env_saved);
  CHECK(drive(b, env_b, 30) == tail_a);
  CHECK(b.gnn_exploit() == a.gnn_exploit());
  CHECK(b.gnn_explore() == a.gnn_explore());
}

TEST_CASE("saving with a pending recommendation is refused") {
  GnbPolicy p(small_config(), 4, 3);
  p.recommend(0, std::vector<VectorXd>{VectorXd::Unit(3, 0)});
  CHECK_THROWS_AS(p.save(), validation_error);
}

TEST_CASE("config validation") {
  auto c = small_config();
  c.alpha = 1.5;
  CHECK_THROWS_AS(c.validate(), config_error);
  c = small_config();
  c.k = 0;
  CHECK_THROWS_AS(c.validate(), config_error);
  c = small_config();
  c.n_tilde = 10;
  CHECK_THROWS_AS(GnbPolicy(c, 4, 3), config_error);
  c = small_config();
  CHECK(policy_config_from_json(to_json(c)).width == c.width);
}
