#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gnb/graph.hpp"
#include "gnb/numerics.hpp"
#include "gnb/user_models.hpp"

namespace gnb {

struct PolicyConfig {
  double alpha = 1.0;  // exploration coefficient, in [0,1]
  int k = 1;           // propagation hops
  Kernel kernel{};
  Normalization normalization = Normalization::symmetric;
  Index width = 32;  // m
  int depth = 2;     // L
  double eta1 = 1e-2;
  double eta2 = 1e-2;
  int steps1 = 20;  // J1
  int steps2 = 20;  // J2
  Index pool_size = 64;      // P, user exploration input
  Index gnn_pool_size = 64;  // P_g, GNN exploration input
  Index n_tilde = 0;         // 0 = full population
  NeighborhoodStrategy neighborhood = NeighborhoodStrategy::uniform_random;
  std::int64_t train_every = 100;
  std::int64_t train_burnin = 1000;
  SnapshotMode snapshot = SnapshotMode::latest;
  StartMode start = StartMode::warm;
  std::size_t snapshot_cap = 16;
  LossReduction reduction = LossReduction::sum;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const PolicyConfig& c);
PolicyConfig policy_config_from_json(const nlohmann::json& j);

// Train every round up to `burnin`, then every `every` rounds.
bool should_train(std::int64_t round, std::int64_t burnin, std::int64_t every);

struct ArmScore {
  double reward = 0.0;  // r-hat
  double gain = 0.0;    // b-hat
};

struct Decision {
  std::size_t chosen_index = 0;
  std::vector<ArmScore> scores;
  bool tie_broken = false;
  bool normalized_input = false;  // some context was rescaled to unit norm
};

// argmax_i (reward_i + alpha * gain_i), lowest index on ties.
Decision select_arm(std::vector<ArmScore> scores, double alpha);

// Copies of the contexts at unit norm; throws on zero / wrong-dimension vectors.
std::vector<VectorXd> unit_contexts(std::span<const VectorXd> arms, Index dim, bool* normalized);

class Policy {
 public:
  virtual ~Policy() = default;

  virtual std::string name() const = 0;
  virtual Decision recommend(Index user, std::span<const VectorXd> arms) = 0;
  virtual void observe(Index user, const Decision& decision, double reward) = 0;
  // Returns true when a training pass ran this round.
  virtual bool maybe_train() = 0;
  virtual std::int64_t round() const = 0;

  virtual nlohmann::json save() const = 0;
  virtual void load(const nlohmann::json& state) = 0;

  // Element std of (S^(1))^k for the most recently served arm, NaN if not tracked.
  virtual double last_graph_spread() const { return std::numeric_limits<double>::quiet_NaN(); }
};

void check_reward(double reward);

}  // namespace gnb
