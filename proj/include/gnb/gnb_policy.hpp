#pragma once

#include <deque>
#include <optional>
#include <random>
#include <vector>

#include "gnb/gnn.hpp"
#include "gnb/graph.hpp"
#include "gnb/policy.hpp"
#include "gnb/user_models.hpp"

namespace gnb {

// One served round as remembered for GNN training. Everything here was
// computed with the parameters in effect before that round's training.
struct GnbLogRecord {
  std::int64_t round = 0;
  Index user = 0;
  VectorXd context;
  VectorXd exploit_propagation;  // row of (S^(1))^k for the user, full-population indexed
  VectorXd explore_propagation;  // same for S^(2); empty when exploration is ablated
  VectorXd gnn_gradient;         // pooled grad of the exploitation GNN; empty when ablated
  double served_reward = 0.0;    // r-hat
  double served_gain = 0.0;      // b-hat
  double reward = 0.0;
  std::uint64_t params_version = 0;
  std::uint64_t exploit_graph_fingerprint = 0;
  std::uint64_t explore_graph_fingerprint = 0;
};

struct GnnPair {
  GnnParams exploit;
  GnnParams explore;
};

class GnbPolicy final : public Policy {
 public:
  // With `ablate_exploration` the exploration graph, exploration GNN and user
  // exploration networks are never evaluated or trained (pure exploitation).
  GnbPolicy(PolicyConfig config, Index users, Index context_dim, bool ablate_exploration = false);

  std::string name() const override { return ablate_ ? "greedy_gnb" : "gnb"; }
  Decision recommend(Index user, std::span<const VectorXd> arms) override;
  void observe(Index user, const Decision& decision, double reward) override;
  bool maybe_train() override;
  std::int64_t round() const override { return round_; }
  nlohmann::json save() const override;
  void load(const nlohmann::json& state) override;
  double last_graph_spread() const override { return last_spread_; }

  const PolicyConfig& config() const { return config_; }
  Index user_count() const { return static_cast<Index>(users_.size()); }
  const std::vector<UserModel>& users() const { return users_; }
  const GnnParams& gnn_exploit() const { return gnn_.exploit; }
  const GnnParams& gnn_explore() const { return gnn_.explore; }
  const std::vector<GnbLogRecord>& log() const { return log_; }
  std::uint64_t params_version() const { return version_; }
  const GnnDataset& exploit_dataset() const { return exploit_data_; }
  const GnnDataset& explore_dataset() const { return explore_data_; }
  // Members of the neighborhood used by the last recommend call.
  const std::vector<Index>& last_members() const { return last_members_; }

 private:
  struct ArmServe {
    VectorXd context;
    VectorXd exploit_propagation;
    VectorXd explore_propagation;
    PooledGradient gnn_gradient;
    double user_prediction = 0.0;
    PooledGradient user_gradient;
    std::uint64_t g1 = 0, g2 = 0;
    double spread = 0.0;
  };
  struct Pending {
    Index user = 0;
    Decision decision;
    ArmServe served;
  };

  void rebuild_datasets();

  PolicyConfig config_;
  Index context_dim_ = 0;
  bool ablate_ = false;
  std::vector<UserModel> users_;
  GnnPair gnn_;
  GnnPair gnn_initial_;
  std::deque<GnnPair> gnn_snapshots_;
  std::vector<GnbLogRecord> log_;
  GnnDataset exploit_data_;
  GnnDataset explore_data_;
  std::int64_t round_ = 0;
  Index last_user_ = -1;
  std::uint64_t version_ = 0;
  std::mt19937_64 neighborhood_rng_;
  std::mt19937_64 snapshot_rng_;
  std::optional<Pending> pending_;
  std::vector<Index> last_members_;
  double last_spread_ = std::numeric_limits<double>::quiet_NaN();
};

}  // namespace gnb
