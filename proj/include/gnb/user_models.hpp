#pragma once

#include <deque>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "gnb/numerics.hpp"

namespace gnb {

using FcParamsD = FcParams<double>;

// A flattened network gradient reduced to a fixed length by bucket means,
// then scaled to unit Euclidean norm. A zero raw gradient stays zero.
struct PooledGradient {
  VectorXd values;
  double norm = 0.0;  // norm of `values`: 1 or 0
  bool is_zero = true;
};

// Bucket means over `pool_size` contiguous buckets; the last bucket absorbs the remainder.
VectorXd average_pool(const Eigen::Ref<const VectorXd>& raw, Index pool_size);

PooledGradient pool_and_normalize(const Eigen::Ref<const VectorXd>& raw, Index pool_size);

enum class SnapshotMode { latest, uniform_snapshot };
enum class StartMode { warm, cold };

std::string to_string(SnapshotMode m);
std::string to_string(StartMode m);
SnapshotMode parse_snapshot_mode(const std::string& s);
StartMode parse_start_mode(const std::string& s);

struct TrainOptions {
  double eta = 1e-3;
  int steps = 100;
  StartMode start = StartMode::warm;
  SnapshotMode snapshot = SnapshotMode::latest;
  std::size_t snapshot_cap = 16;
  LossReduction reduction = LossReduction::sum;
  bool train_exploration = true;
};

struct HistoryRecord {
  VectorXd context;
  double reward = 0.0;
  double served_prediction = 0.0;  // f^(1)(x) with the parameters in effect when served
  VectorXd served_gradient;        // pooled grad f^(1)(x) at the same parameters
};

struct ParamPair {
  FcParamsD exploit;
  FcParamsD explore;
};

class UserModel {
 public:
  UserModel() = default;
  // exploit: d -> width ... -> 1; explore: pool_size -> width ... -> 1
  UserModel(Index user_id, Index context_dim, Index pool_size, Index width, int depth, std::uint64_t seed);

  Index user_id = 0;
  Index pool_size = 0;
  FcParamsD exploit;
  FcParamsD explore;
  ParamPair initial;
  std::vector<HistoryRecord> history;
  std::deque<ParamPair> snapshots;

  Index context_dim() const { return exploit.input_dim(); }
  void add_record(HistoryRecord rec);
};

double predict_reward(const UserModel& model, const Eigen::Ref<const VectorXd>& x);

PooledGradient pooled_gradient(const UserModel& model, const Eigen::Ref<const VectorXd>& x, Index pool_size);
inline PooledGradient pooled_gradient(const UserModel& model, const Eigen::Ref<const VectorXd>& x) {
  return pooled_gradient(model, x, model.pool_size);
}

double predict_gain(const UserModel& model, const PooledGradient& g);
double predict_gain(const UserModel& model, const Eigen::Ref<const VectorXd>& g);

struct UserTrainReport {
  bool trained = false;
  std::string warning;
  double exploit_loss_before = 0.0;
  double exploit_loss_after = 0.0;
  double explore_loss_before = 0.0;
  double explore_loss_after = 0.0;
};

// Quadratic losses over the model's history.
double exploitation_loss(const UserModel& model, const FcParamsD& params, LossReduction r = LossReduction::sum);
double exploration_loss(const UserModel& model, const FcParamsD& params, LossReduction r = LossReduction::sum);

// Labels r_tau - f^(1)(x_tau) with the prediction frozen at serve time.
VectorXd exploration_labels(const UserModel& model);

// GD on the exploitation loss, then on the exploration loss; the resulting pair
// is pushed to the snapshot ring and the active pair chosen per options.snapshot.
UserTrainReport train_user(UserModel& model, const TrainOptions& options, std::mt19937_64& rng);

// Shared by user and GNN training: choose the active pair after a new snapshot.
template <typename Pair>
const Pair& select_snapshot(const std::deque<Pair>& snapshots, SnapshotMode mode, std::mt19937_64& rng) {
  if (mode == SnapshotMode::latest || snapshots.size() == 1) return snapshots.back();
  std::uniform_int_distribution<std::size_t> pick(0, snapshots.size() - 1);
  return snapshots[pick(rng)];
}

}  // namespace gnb
