#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gnb/graph.hpp"
#include "gnb/numerics.hpp"

namespace gnb {

struct OracleView {
  VectorXd expected_rewards;
  double best_value = 0.0;
  // false when the values are realized rewards from data rather than expectations
  bool is_oracle = true;
};

OracleView make_oracle(VectorXd expected, bool is_oracle = true);

struct Round {
  Index user = 0;
  std::vector<VectorXd> arms;
  OracleView oracle;
};

// A reward-generating world: next_round() draws a user and candidates,
// reward(i) then realizes the reward of candidate i of that round.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual std::string name() const = 0;
  virtual Index users() const = 0;
  virtual Index context_dim() const = 0;
  virtual bool has_oracle() const = 0;
  virtual Round next_round() = 0;
  virtual double reward(std::size_t arm_index) = 0;
  virtual nlohmann::json save() const = 0;
  virtual void load(const nlohmann::json& state) = 0;
};

enum class LinkKind { sigmoid_dot, cosine_affinity };
enum class NoiseKind { bernoulli, clamped_gaussian };
std::string to_string(LinkKind k);
std::string to_string(NoiseKind k);
LinkKind parse_link(const std::string& s);
NoiseKind parse_noise(const std::string& s);

struct SyntheticConfig {
  Index users = 10;
  Index dim = 5;
  Index arms = 5;
  Index groups = 2;
  double jitter = 0.0;        // within-group perturbation of the latent vectors
  LinkKind link = LinkKind::sigmoid_dot;
  double logit_scale = 1.0;   // sigmoid_dot: mu = sigmoid(scale * <theta, x>)
  NoiseKind noise = NoiseKind::bernoulli;
  double sigma = 0.1;         // clamped_gaussian noise level
  double rho = 1e-3;          // minimum pairwise arm distance within a round
  int max_attempts = 1000;    // rejection-sampling budget per arm
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const SyntheticConfig& c);

// Users belong to latent groups; expected reward is a link of <theta_u, x>.
class SyntheticEnv final : public Environment {
 public:
  explicit SyntheticEnv(SyntheticConfig config);
  // Explicit unit-norm latents, one row per user.
  SyntheticEnv(SyntheticConfig config, MatrixXd latents);

  std::string name() const override { return "synthetic"; }
  Index users() const override { return config_.users; }
  Index context_dim() const override { return config_.dim; }
  bool has_oracle() const override { return true; }
  Round next_round() override;
  double reward(std::size_t arm_index) override;
  nlohmann::json save() const override;
  void load(const nlohmann::json& state) override;

  const SyntheticConfig& config() const { return config_; }
  const MatrixXd& latents() const { return latents_; }
  std::int64_t round() const { return round_; }

  double expected_reward(Index user, const Eigen::Ref<const VectorXd>& x) const;
  double synth_reward(Index user, const Eigen::Ref<const VectorXd>& x);
  // Ground-truth exploitation graph: w(u,u') = psi(mu(u,x), mu(u',x)).
  UserGraph true_exploitation_graph(const Eigen::Ref<const VectorXd>& x, const Kernel& kernel,
                                    Normalization mode = Normalization::symmetric) const;

 private:
  SyntheticConfig config_;
  MatrixXd latents_;
  std::mt19937_64 rng_;
  std::int64_t round_ = 0;
  Round current_;
};

// Ground-truth graph for any environment; only the synthetic world has one.
UserGraph true_exploitation_graph(const Environment& env, const Eigen::Ref<const VectorXd>& x, const Kernel& kernel,
                                  Normalization mode = Normalization::symmetric);

struct LabeledSample {
  VectorXd features;
  Index label = 0;
};

std::vector<LabeledSample> load_classification_csv(const std::filesystem::path& path);

// C arms per round: arm c is x shifted right by c slots in R^(d0 + C - 1),
// renormalized. The served user is the node of the sample's class.
class ClassificationEnv final : public Environment {
 public:
  ClassificationEnv(std::vector<LabeledSample> samples, Index classes, std::uint64_t seed);

  std::string name() const override { return "classification"; }
  Index users() const override { return classes_; }
  Index context_dim() const override { return feature_dim_ + classes_ - 1; }
  bool has_oracle() const override { return true; }
  Round next_round() override;
  double reward(std::size_t arm_index) override;
  nlohmann::json save() const override;
  void load(const nlohmann::json& state) override;

  Index classes() const { return classes_; }
  Index feature_dim() const { return feature_dim_; }

  static VectorXd embed_arm(const Eigen::Ref<const VectorXd>& x, Index arm, Index classes);
  static VectorXd strip_arm(const Eigen::Ref<const VectorXd>& arm_context, Index arm, Index feature_dim);

 private:
  void reshuffle();

  std::vector<LabeledSample> samples_;
  Index classes_ = 0;
  Index feature_dim_ = 0;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  Index current_label_ = 0;
};

// Preprocessed features plus interaction log. Each round takes one positive
// interaction (reward > 0) and pads it with arms_per_round - 1 arms the user has
// no positive record for. Rewards come from the file (0 when unrecorded), so
// regret is measured against realized, not expected, rewards.
class FeatureFileEnv final : public Environment {
 public:
  FeatureFileEnv(const std::filesystem::path& features, const std::filesystem::path& interactions, Index arms_per_round,
                 std::uint64_t seed);

  std::string name() const override { return "feature_file"; }
  Index users() const override { return static_cast<Index>(user_ids_.size()); }
  Index context_dim() const override { return dim_; }
  bool has_oracle() const override { return false; }
  Round next_round() override;
  double reward(std::size_t arm_index) override;
  nlohmann::json save() const override;
  void load(const nlohmann::json& state) override;

  const std::vector<std::string>& user_ids() const { return user_ids_; }
  const std::vector<std::string>& arm_ids() const { return arm_ids_; }
  const MatrixXd& user_features() const { return user_features_; }
  const MatrixXd& arm_features() const { return arm_features_; }
  double recorded_reward(Index user, Index arm) const;

 private:
  struct Interaction {
    Index user;
    Index arm;
    double reward;
  };

  Index dim_ = 0;
  Index arms_per_round_ = 0;
  std::vector<std::string> user_ids_;
  std::vector<std::string> arm_ids_;
  MatrixXd user_features_;
  MatrixXd arm_features_;  // unit-norm rows
  std::vector<Interaction> interactions_;
  std::vector<std::size_t> positives_;
  std::mt19937_64 rng_;
  VectorXd current_rewards_;
};

}  // namespace gnb
