#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "bridge.hpp"
#include "gnb/environments.hpp"

using namespace gnb;
namespace fs = std::filesystem;

namespace {

fs::path write_temp(const std::string& name, const std::string& text) {
  const fs::path dir = fs::temp_directory_path() / "gnb_env_tests";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  std::ofstream(p) << text;
  return p;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

const char* kFeatures =
    "kind,id,f0,f1,f2\n"
    "user,alice,1,0,0\n"
    "user,bob,0,1,0\n"
    "arm,a1,1,0,0\n"
    "arm,a2,0,2,0\n"
    "arm,a3,0,0,3\n"
    "arm,a4,1,1,0\n";

const char* kInteractions =
    "user_id,arm_id,reward\n"
    "alice,a1,1\n"
    "alice,a2,0\n"
    "bob,a2,0.5\n"
    "bob,a3,0\n";

}  // namespace

TEST_CASE("orthogonal latent gives expected reward one half") {
  SyntheticConfig c;
  c.users = 1;
  c.groups = 1;
  c.dim = 2;
  MatrixXd latents(1, 2);
  latents << 1.0, 0.0;
  SyntheticEnv env(c, latents);
  CHECK(env.expected_reward(0, VectorXd::Unit(2, 1)) == 0.5);
  CHECK(env.expected_reward(0, VectorXd::Unit(2, 0)) == doctest::Approx(sigmoid(1.0)).epsilon(1e-15));
  c.link = LinkKind::cosine_affinity;
  SyntheticEnv affine(c, latents);
  CHECK(affine.expected_reward(0, VectorXd::Unit(2, 1)) == 0.5);
  CHECK(affine.expected_reward(0, VectorXd::Unit(2, 0)) == 1.0);
}

TEST_CASE("arms are unit-norm and separated by at least rho") {
  SyntheticConfig c;
  c.users = 4;
  c.dim = 3;
  c.arms = 6;
  c.rho = 0.2;
  c.seed = 5;
  SyntheticEnv env(c);
  for (int t = 0; t < 1000; ++t) {
    const auto r = env.next_round();
    REQUIRE(r.arms.size() == 6);
    CHECK(r.user >= 0);
    CHECK(r.user < 4);
    for (std::size_t i = 0; i < r.arms.size(); ++i) {
      CHECK(std::abs(r.arms[i].norm() - 1.0) < 1e-12);
      for (std::size_t j = i + 1; j < r.arms.size(); ++j) CHECK((r.arms[i] - r.arms[j]).norm() >= 0.2);
    }
    for (std::size_t i = 0; i < r.arms.size(); ++i)
      CHECK(r.oracle.expected_rewards(static_cast<Index>(i)) == env.expected_reward(r.user, r.arms[i]));
    CHECK(r.oracle.best_value == r.oracle.expected_rewards.maxCoeff());
  }
}

TEST_CASE("impossible separation is a validation error") {
  SyntheticConfig c;
  c.dim = 2;
  c.arms = 8;
  c.rho = 1.9;
  c.max_attempts = 50;
  SyntheticEnv env(c);
  CHECK_THROWS_AS(env.next_round(), validation_error);
}

TEST_CASE("same seed gives identical streams, different seed does not") {
  SyntheticConfig c;
  c.seed = 9;
  SyntheticEnv a(c), b(c);
  c.seed = 10;
  SyntheticEnv other(c);
  CHECK(a.latents() == b.latents());
  bool differs = false;
  for (int t = 0; t < 50; ++t) {
    const auto ra = a.next_round();
    const auto rb = b.next_round();
    const auto ro = other.next_round();
    CHECK(ra.user == rb.user);
    for (std::size_t i = 0; i < ra.arms.size(); ++i) CHECK(ra.arms[i] == rb.arms[i]);
    CHECK(a.reward(0) == b.reward(0));
    differs = differs || !(ra.arms[0] == ro.arms[0]);
  }
  CHECK(differs);
}

TEST_CASE("save and load resume the stream") {
  SyntheticConfig c;
  c.seed = 4;
  SyntheticEnv a(c);
  for (int t = 0; t < 7; ++t) a.next_round();
  const auto state = a.save();
  SyntheticEnv b(c);
  b.load(state);
  for (int t = 0; t < 10; ++t) {
    const auto ra = a.next_round();
    const auto rb = b.next_round();
    CHECK(ra.user == rb.user);
    CHECK(ra.arms[2] == rb.arms[2]);
    CHECK(a.reward(1) == b.reward(1));
  }
}

TEST_CASE("reward noise models") {
  SyntheticConfig c;
  c.users = 1;
  c.groups = 1;
  c.dim = 2;
  c.link = LinkKind::cosine_affinity;
  MatrixXd latents(1, 2);
  latents << 1.0, 0.0;
  SyntheticEnv certain(c, latents);
  for (int i = 0; i < 100; ++i) CHECK(certain.synth_reward(0, VectorXd::Unit(2, 0)) == 1.0);

  SyntheticEnv coin(c, latents);
  double sum = 0.0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const double r = coin.synth_reward(0, VectorXd::Unit(2, 1));
    CHECK((r == 0.0 || r == 1.0));
    sum += r;
  }
  CHECK(std::abs(sum / draws - 0.5) < 0.01);

  c.noise = NoiseKind::clamped_gaussian;
  c.sigma = 0.0;
  SyntheticEnv exact(c, latents);
  const VectorXd x = VectorXd(Eigen::Vector2d(0.6, 0.8));
  CHECK(exact.synth_reward(0, x) == exact.expected_reward(0, x));
  c.sigma = 2.0;
  SyntheticEnv wide(c, latents);
  for (int i = 0; i < 1000; ++i) {
    const double r = wide.synth_reward(0, x);
    CHECK(r >= 0.0);
    CHECK(r <= 1.0);
  }
}

TEST_CASE("ground-truth graph uses the kernel of expected rewards") {
  SyntheticConfig c;
  c.users = 3;
  c.dim = 4;
  c.seed = 2;
  c.jitter = 0.5;
  SyntheticEnv env(c);
  const Kernel k{KernelKind::exp_abs, 1.0};
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const VectorXd x = bridge::random_unit(4, rng);
    const auto g = env.true_exploitation_graph(x, k);
    for (Index i = 0; i < 3; ++i)
      for (Index j = 0; j < 3; ++j) {
        const double expected = std::exp(-std::abs(env.expected_reward(i, x) - env.expected_reward(j, x)));
        CHECK(std::abs(g.adjacency(i, j) - expected) < 1e-15);
      }
    // same construction as the estimated graph with true mu plugged in
    std::vector<double> mu;
    for (Index u = 0; u < 3; ++u) mu.push_back(env.expected_reward(u, x));
    CHECK(graph_from_values(mu, k, Normalization::symmetric).normalized == g.normalized);
    CHECK(true_exploitation_graph(static_cast<const Environment&>(env), x, k).adjacency == g.adjacency);
  }
}

TEST_CASE("users in one group share a ground-truth latent") {
  SyntheticConfig c;
  c.users = 6;
  c.groups = 2;
  c.seed = 8;
  SyntheticEnv env(c);
  CHECK(env.latents().row(0) == env.latents().row(2));
  CHECK(env.latents().row(1) == env.latents().row(5));
  CHECK_FALSE(env.latents().row(0) == env.latents().row(1));
  for (Index u = 0; u < 6; ++u) CHECK(std::abs(env.latents().row(u).norm() - 1.0) < 1e-12);
}

TEST_CASE("synthetic config validation") {
  SyntheticConfig c;
  c.users = 0;
  CHECK_THROWS_AS(c.validate(), config_error);
  c = {};
  c.rho = -1.0;
  CHECK_THROWS_AS(c.validate(), config_error);
  CHECK(parse_link("cosine-affinity") == LinkKind::cosine_affinity);
  CHECK(to_string(parse_noise("clamped-gaussian")) == "clamped-gaussian");
  CHECK_THROWS_AS(parse_link("tanh"), config_error);
}

TEST_CASE("classification arm embedding") {
  const VectorXd x = VectorXd::Unit(2, 0);
  // C = 3, x = [1, 0]: arm c puts the 1 at slot c of a length-4 vector
  for (Index c = 0; c < 3; ++c) {
    const VectorXd e = ClassificationEnv::embed_arm(x, c, 3);
    REQUIRE(e.size() == 4);
    CHECK(e == VectorXd::Unit(4, c));
    CHECK(ClassificationEnv::strip_arm(e, c, 2) == x);
  }
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const VectorXd v = bridge::random_unit(5, rng);
    for (Index c = 0; c < 4; ++c) {
      const VectorXd e = ClassificationEnv::embed_arm(v, c, 4);
      CHECK(std::abs(e.norm() - 1.0) < 1e-12);
      CHECK((ClassificationEnv::strip_arm(e, c, 5) - v).cwiseAbs().maxCoeff() < 1e-15);
    }
  }
}

TEST_CASE("classification rounds have one-hot oracles and cover the data") {
  std::vector<LabeledSample> data;
  for (int i = 0; i < 9; ++i) data.push_back({VectorXd::Constant(2, 1.0 + i), static_cast<Index>(i % 3)});
  ClassificationEnv env(data, 3, 4);
  CHECK(env.context_dim() == 4);
  CHECK(env.users() == 3);
  for (int t = 0; t < 27; ++t) {
    const auto r = env.next_round();
    REQUIRE(r.arms.size() == 3);
    CHECK(r.oracle.expected_rewards == VectorXd::Unit(3, r.user));
    CHECK(r.oracle.best_value == 1.0);
    for (std::size_t c = 0; c < 3; ++c) CHECK(env.reward(c) == (static_cast<Index>(c) == r.user ? 1.0 : 0.0));
  }
  CHECK_THROWS_AS(true_exploitation_graph(env, VectorXd::Unit(4, 0), Kernel{}), unsupported_oracle);
  CHECK_THROWS_AS(ClassificationEnv({}, 3, 0), validation_error);
}

TEST_CASE("classification csv loading") {
  const auto ok = write_temp("ok.csv", "label,f0,f1\n# comment\n0,1,2\n2,3,4\n1,0.5,0\n");
  const auto samples = load_classification_csv(ok);
  REQUIRE(samples.size() == 3);
  CHECK(samples[1].label == 2);
  CHECK(samples[1].features == VectorXd(Eigen::Vector2d(3, 4)));
  CHECK(load_classification_csv(write_temp("commented.csv", "# blobs\nlabel,f0\n1,2\n")).size() == 1);

  const auto bad_label = write_temp("bad_label.csv", "0,1,2\nx,1,2\n");
  try {
    load_classification_csv(bad_label);
    FAIL("expected parse_error");
  } catch (const parse_error& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(load_classification_csv(write_temp("ragged.csv", "0,1,2\n1,1\n")), parse_error);
  CHECK_THROWS_AS(load_classification_csv(write_temp("empty.csv", "")), config_error);
  CHECK_THROWS_AS(load_classification_csv("/nonexistent/file.csv"), config_error);
}

TEST_CASE("feature-file environment round-trip on a toy log") {
  const auto f = write_temp("features.csv", kFeatures);
  const auto i = write_temp("interactions.csv", kInteractions);
  FeatureFileEnv env(f, i, 3, 1);
  CHECK(env.users() == 2);
  CHECK(env.context_dim() == 3);
  CHECK_FALSE(env.has_oracle());
  CHECK(env.arm_features().row(1) == Eigen::RowVector3d(0, 1, 0));
  CHECK(env.recorded_reward(1, 1) == 0.5);
  CHECK(env.recorded_reward(0, 2) == 0.0);
  CHECK_THROWS_AS(true_exploitation_graph(env, VectorXd::Unit(3, 0), Kernel{}), unsupported_oracle);

  for (int t = 0; t < 50; ++t) {
    const auto r = env.next_round();
    CHECK(r.arms.size() == 3);
    CHECK_FALSE(r.oracle.is_oracle);
    int positives = 0;
    for (std::size_t a = 0; a < r.arms.size(); ++a) {
      Index arm = -1;
      for (Index k = 0; k < env.arm_features().rows(); ++k)
        if (env.arm_features().row(k).transpose() == r.arms[a]) arm = k;
      REQUIRE(arm >= 0);
      CHECK(env.reward(a) == env.recorded_reward(r.user, arm));
      positives += env.reward(a) > 0.0;
    }
    CHECK(positives == 1);
  }

  FeatureFileEnv again(f, i, 3, 1);
  FeatureFileEnv resumed(f, i, 3, 1);
  for (int t = 0; t < 5; ++t) again.next_round();
  resumed.load(again.save());
  for (int t = 0; t < 5; ++t) CHECK(again.next_round().user == resumed.next_round().user);
}

TEST_CASE("feature-file errors carry line numbers") {
  const auto f = write_temp("features.csv", kFeatures);
  const auto bad_reward = write_temp("bad_reward.csv", "user_id,arm_id,reward\nalice,a1,1\nbob,a3,1.7\n");
  try {
    FeatureFileEnv(f, bad_reward, 3, 1);
    FAIL("expected parse_error");
  } catch (const parse_error& e) {
    CHECK(e.line() == 3);
  }
  const auto missing = write_temp("missing.csv", "kind,id,f0,f1\nuser,u,1,0\narm,a,1\n");
  try {
    FeatureFileEnv(missing, bad_reward, 3, 1);
    FAIL("expected parse_error");
  } catch (const parse_error& e) {
    CHECK(e.line() == 3);
  }
  const auto unknown = write_temp("unknown.csv", "user_id,arm_id,reward\ncarol,a1,1\n");
  CHECK_THROWS_AS(FeatureFileEnv(f, unknown, 3, 1), parse_error);
  const auto no_positive = write_temp("zeros.csv", "user_id,arm_id,reward\nalice,a1,0\n");
  CHECK_THROWS_AS(FeatureFileEnv(f, no_positive, 3, 1), config_error);
}
