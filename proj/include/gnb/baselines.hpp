#pragma once

#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gnb/policy.hpp"
#include "gnb/user_models.hpp"

namespace gnb {

enum class PolicyKind { gnb, greedy_gnb, neural_ind, neural_pool, random };
std::string to_string(PolicyKind k);
PolicyKind parse_policy_kind(const std::string& s);

// Uniform choice among the candidates.
class RandomPolicy final : public Policy {
 public:
  explicit RandomPolicy(std::uint64_t seed);

  std::string name() const override { return "random"; }
  Decision recommend(Index user, std::span<const VectorXd> arms) override;
  void observe(Index user, const Decision& decision, double reward) override;
  bool maybe_train() override { return false; }
  std::int64_t round() const override { return round_; }
  nlohmann::json save() const override;
  void load(const nlohmann::json& state) override;

 private:
  std::mt19937_64 rng_;
  std::int64_t round_ = 0;
};

Decision random_recommend(std::span<const VectorXd> arms, std::mt19937_64& rng);

// No-graph ablations of GNB: score = f^(1)(x) + alpha f^(2)(pooled grad f^(1)(x)).
// Independent keeps one model pair per user; pooled shares one pair across users.
class NeuralPolicy final : public Policy {
 public:
  NeuralPolicy(PolicyConfig config, Index users, Index context_dim, bool pooled);

  std::string name() const override { return pooled_ ? "neural_pool" : "neural_ind"; }
  Decision recommend(Index user, std::span<const VectorXd> arms) override;
  void observe(Index user, const Decision& decision, double reward) override;
  bool maybe_train() override;
  std::int64_t round() const override { return round_; }
  nlohmann::json save() const override;
  void load(const nlohmann::json& state) override;

  const std::vector<UserModel>& models() const { return models_; }
  const UserModel& model_for(Index user) const;

 private:
  UserModel& model_for(Index user);

  struct Pending {
    Index user = 0;
    Decision decision;
    VectorXd context;
    double prediction = 0.0;
    VectorXd gradient;
  };

  PolicyConfig config_;
  Index users_ = 0;
  Index context_dim_ = 0;
  bool pooled_ = false;
  std::vector<UserModel> models_;
  std::int64_t round_ = 0;
  Index last_user_ = -1;
  std::mt19937_64 snapshot_rng_;
  std::optional<Pending> pending_;
};

std::unique_ptr<Policy> make_policy(PolicyKind kind, const PolicyConfig& config, Index users, Index context_dim);

}  // namespace gnb
