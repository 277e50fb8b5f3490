#include <doctest.h>

#include "bridge.hpp"
#include "gnb/baselines.hpp"
#include "gnb/environments.hpp"

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
  c.train_burnin = 10;
  c.train_every = 5;
  c.seed = seed;
  return c;
}

SyntheticConfig env_config(Index users, std::uint64_t seed = 2) {
  SyntheticConfig e;
  e.users = users;
  e.groups = std::min<Index>(2, users);
  e.dim = 4;
  e.arms = 4;
  e.seed = seed;
  return e;
}

std::vector<std::size_t> drive(Policy& p, Environment& env, int rounds) {
  std::vector<std::size_t> out;
  for (int t = 0; t < rounds; ++t) {
    const auto r = env.next_round();
    const auto d = p.recommend(r.user, r.arms);
    p.observe(r.user, d, env.reward(d.chosen_index));
    p.maybe_train();
    out.push_back(d.chosen_index);
  }
  return out;
}

}  // namespace

TEST_CASE("random policy with one arm picks it") {
  RandomPolicy p(3);
  for (int t = 0; t < 20; ++t) CHECK(p.recommend(0, std::vector<VectorXd>{VectorXd::Ones(2)}).chosen_index == 0);
}

TEST_CASE("random policy is uniform over five arms") {
  std::mt19937_64 rng(7);
  const std::vector<VectorXd> arms(5, VectorXd::Ones(2));
  std::vector<int> counts(5, 0);
  const int draws = 100000;
  for (int t = 0; t < draws; ++t) ++counts[random_recommend(arms, rng).chosen_index];
  double chi2 = 0.0;
  for (int c : counts) {
    CHECK(std::abs(static_cast<double>(c) / draws - 0.2) < 0.02);
    chi2 += (c - 0.2 * draws) * (c - 0.2 * draws) / (0.2 * draws);
  }
  // 4 degrees of freedom, 0.999 quantile
  CHECK(chi2 < 18.47);
}

TEST_CASE("random policy is repeatable per seed and round-trips") {
  RandomPolicy a(11), b(11);
  const std::vector<VectorXd> arms(4, VectorXd::Ones(2));
  for (int t = 0; t < 30; ++t) {
    const auto da = a.recommend(0, arms);
    CHECK(da.chosen_index == b.recommend(0, arms).chosen_index);
    a.observe(0, da, 0.0);
  }
  RandomPolicy c(0);
  c.load(a.save());
  for (int t = 0; t < 30; ++t) CHECK(a.recommend(0, arms).chosen_index == c.recommend(0, arms).chosen_index);
  CHECK_THROWS_AS(a.recommend(0, std::vector<VectorXd>{}), validation_error);
}

TEST_CASE("with one user independent and pooled neural baselines coincide") {
  NeuralPolicy ind(small_config(5), 1, 4, false), pool(small_config(5), 1, 4, true);
  SyntheticEnv ea(env_config(1)), eb(env_config(1));
  CHECK(drive(ind, ea, 60) == drive(pool, eb, 60));
  CHECK(ind.models()[0].exploit == pool.models()[0].exploit);
}

TEST_CASE("pooled baseline with alpha = 0 ranks by the shared exploitation net") {
  auto c = small_config(6);
  c.alpha = 0.0;
  NeuralPolicy pool(c, 3, 4, true);
  const NeuralPolicy& pool_policy = pool;
  SyntheticEnv env(env_config(3));
  drive(pool, env, 30);
  const auto r = env.next_round();
  const auto d = pool.recommend(r.user, r.arms);
  std::size_t best = 0;
  for (std::size_t i = 0; i < r.arms.size(); ++i) {
    CHECK(d.scores[i].reward == predict_reward(pool_policy.model_for(r.user), r.arms[i]));
    if (d.scores[i].reward > d.scores[best].reward) best = i;
  }
  CHECK(d.chosen_index == best);
  CHECK(&pool_policy.model_for(0) == &pool_policy.model_for(2));
}

TEST_CASE("independent baseline trains only the served user") {
  NeuralPolicy ind(small_config(8), 4, 4, false);
  SyntheticEnv env(env_config(4));
  const auto r = env.next_round();
  const auto d = ind.recommend(r.user, r.arms);
  const auto before = ind.models();
  ind.observe(r.user, d, env.reward(d.chosen_index));
  CHECK(ind.maybe_train());
  for (Index u = 0; u < 4; ++u) {
    const bool same = ind.models()[static_cast<std::size_t>(u)].exploit == before[static_cast<std::size_t>(u)].exploit;
    CHECK(same == (u != r.user));
  }
  CHECK(ind.models()[static_cast<std::size_t>(r.user)].history.size() == 1);
}

TEST_CASE("neural baseline checkpoint round-trip") {
  NeuralPolicy a(small_config(9), 3, 4, false);
  SyntheticEnv env(env_config(3));
  drive(a, env, 20);
  const auto state = a.save();
  const auto env_state = env.save();
  const auto tail = drive(a, env, 20);
  NeuralPolicy b(small_config(0), 3, 4, false);
  b.load(state);
  SyntheticEnv env_b(env_config(3));
  env_b.load(env_state);
  CHECK(drive(b, env_b, 20) == tail);
}

TEST_CASE("every policy kind runs through the common interface") {
  for (auto kind : {PolicyKind::gnb, PolicyKind::greedy_gnb, PolicyKind::neural_ind, PolicyKind::neural_pool,
                    PolicyKind::random}) {
    auto p = make_policy(kind, small_config(), 3, 4);
    SyntheticEnv env(env_config(3));
    const auto chosen = drive(*p, env, 25);
    CHECK(chosen.size() == 25);
    CHECK(p->round() == 25);
    CHECK(p->name() == to_string(kind));
    CHECK(parse_policy_kind(to_string(kind)) == kind);
  }
  CHECK_THROWS(parse_policy_kind("ucb"));
}
