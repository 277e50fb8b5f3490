#include "gnb/user_models.hpp"

#include <cmath>

namespace gnb {

VectorXd average_pool(const Eigen::Ref<const VectorXd>& raw, Index pool_size) {
  if (pool_size < 1) throw validation_error("average_pool: pool size must be >= 1");
  if (pool_size > raw.size())
    throw shape_error("average_pool: pool size " + std::to_string(pool_size) + " exceeds gradient length " +
                      std::to_string(raw.size()));
  const Index bucket = raw.size() / pool_size;
  VectorXd pooled(pool_size);
  for (Index b = 0; b < pool_size; ++b) {
    const Index begin = b * bucket;
    const Index len = (b + 1 == pool_size) ? raw.size() - begin : bucket;
    pooled(b) = raw.segment(begin, len).sum() / static_cast<double>(len);
  }
  return pooled;
}

PooledGradient pool_and_normalize(const Eigen::Ref<const VectorXd>& raw, Index pool_size) {
  PooledGradient out;
  out.values = average_pool(raw, pool_size);
  const double n = out.values.norm();
  if (!std::isfinite(n)) throw numeric_error("pool_and_normalize: non-finite gradient");
  if (n > 0.0) {
    out.values /= n;
    out.norm = out.values.norm();
    out.is_zero = false;
  } else {
    out.values.setZero();
    out.norm = 0.0;
    out.is_zero = true;
  }
  return out;
}

std::string to_string(SnapshotMode m) { return m == SnapshotMode::latest ? "latest" : "uniform-snapshot"; }
std::string to_string(StartMode m) { return m == StartMode::warm ? "warm" : "cold"; }

SnapshotMode parse_snapshot_mode(const std::string& s) {
  if (s == "latest") return SnapshotMode::latest;
  if (s == "uniform-snapshot") return SnapshotMode::uniform_snapshot;
  throw validation_error("unknown snapshot mode '" + s + "'");
}

StartMode parse_start_mode(const std::string& s) {
  if (s == "warm") return StartMode::warm;
  if (s == "cold") return StartMode::cold;
  throw validation_error("unknown warm-start mode '" + s + "'");
}

UserModel::UserModel(Index id, Index context_dim, Index pool, Index width, int depth, std::uint64_t seed)
    : user_id(id), pool_size(pool) {
  if (pool < 1) throw validation_error("UserModel: pool size must be >= 1");
  std::mt19937_64 rng(seed);
  exploit = init_params<double>(mlp_dims(context_dim, width, depth), rng);
  if (pool > exploit.total_len())
    throw shape_error("UserModel: pool size " + std::to_string(pool) + " exceeds exploitation parameter count " +
                      std::to_string(exploit.total_len()));
  explore = init_params<double>(mlp_dims(pool, width, depth), rng);
  initial = {exploit, explore};
}

void UserModel::add_record(HistoryRecord rec) {
  if (!(rec.reward >= 0.0 && rec.reward <= 1.0)) throw validation_error("history reward must lie in [0,1]");
  if (rec.context.size() != context_dim()) throw shape_error("history context has wrong dimension");
  if (rec.served_gradient.size() != pool_size) throw shape_error("history gradient has wrong dimension");
  history.push_back(std::move(rec));
}

double predict_reward(const UserModel& model, const Eigen::Ref<const VectorXd>& x) {
  return fc_forward(model.exploit, x).output;
}

PooledGradient pooled_gradient(const UserModel& model, const Eigen::Ref<const VectorXd>& x, Index pool_size) {
  const auto fwd = fc_forward(model.exploit, x);
  const auto grad = fc_backward(model.exploit, fwd.cache);
  return pool_and_normalize(grad.values, pool_size);
}

double predict_gain(const UserModel& model, const PooledGradient& g) { return predict_gain(model, g.values); }

double predict_gain(const UserModel& model, const Eigen::Ref<const VectorXd>& g) {
  return fc_forward(model.explore, g).output;
}

namespace {

struct Batch {
  MatrixXd inputs;
  VectorXd labels;
};

Batch exploitation_batch(const UserModel& model) {
  Batch b{MatrixXd(static_cast<Index>(model.history.size()), model.context_dim()),
          VectorXd(static_cast<Index>(model.history.size()))};
  for (std::size_t i = 0; i < model.history.size(); ++i) {
    b.inputs.row(static_cast<Index>(i)) = model.history[i].context.transpose();
    b.labels(static_cast<Index>(i)) = model.history[i].reward;
  }
  return b;
}

Batch exploration_batch(const UserModel& model) {
  Batch b{MatrixXd(static_cast<Index>(model.history.size()), model.pool_size), exploration_labels(model)};
  for (std::size_t i = 0; i < model.history.size(); ++i)
    b.inputs.row(static_cast<Index>(i)) = model.history[i].served_gradient.transpose();
  return b;
}

FcParamsD descend(FcParamsD params, const Batch& batch, const TrainOptions& opt) {
  for (int j = 0; j < opt.steps; ++j) {
    const auto lg = fc_loss_gradient<double>(params, batch.inputs, batch.labels, opt.reduction);
    params = gd_step(params, lg.grad, opt.eta);
  }
  return params;
}

}  // namespace

VectorXd exploration_labels(const UserModel& model) {
  VectorXd labels(static_cast<Index>(model.history.size()));
  for (std::size_t i = 0; i < model.history.size(); ++i)
    labels(static_cast<Index>(i)) = model.history[i].reward - model.history[i].served_prediction;
  return labels;
}

double exploitation_loss(const UserModel& model, const FcParamsD& params, LossReduction r) {
  if (model.history.empty()) return 0.0;
  const auto b = exploitation_batch(model);
  return fc_loss_gradient<double>(params, b.inputs, b.labels, r).loss;
}

double exploration_loss(const UserModel& model, const FcParamsD& params, LossReduction r) {
  if (model.history.empty()) return 0.0;
  const auto b = exploration_batch(model);
  return fc_loss_gradient<double>(params, b.inputs, b.labels, r).loss;
}

UserTrainReport train_user(UserModel& model, const TrainOptions& opt, std::mt19937_64& rng) {
  UserTrainReport report;
  if (model.history.empty()) {
    report.warning = "user " + std::to_string(model.user_id) + ": empty history, nothing to train";
    return report;
  }
  const bool cold = opt.start == StartMode::cold;

  const auto exploit_batch = exploitation_batch(model);
  FcParamsD exploit = cold ? model.initial.exploit : model.exploit;
  report.exploit_loss_before = fc_loss_gradient<double>(exploit, exploit_batch.inputs, exploit_batch.labels, opt.reduction).loss;
  exploit = descend(std::move(exploit), exploit_batch, opt);
  report.exploit_loss_after = fc_loss_gradient<double>(exploit, exploit_batch.inputs, exploit_batch.labels, opt.reduction).loss;

  FcParamsD explore = cold ? model.initial.explore : model.explore;
  if (opt.train_exploration) {
    const auto explore_batch = exploration_batch(model);
    report.explore_loss_before = fc_loss_gradient<double>(explore, explore_batch.inputs, explore_batch.labels, opt.reduction).loss;
    explore = descend(std::move(explore), explore_batch, opt);
    report.explore_loss_after = fc_loss_gradient<double>(explore, explore_batch.inputs, explore_batch.labels, opt.reduction).loss;
  }

  model.snapshots.push_back({std::move(exploit), std::move(explore)});
  while (model.snapshots.size() > std::max<std::size_t>(opt.snapshot_cap, 1)) model.snapshots.pop_front();
  const auto& active = select_snapshot(model.snapshots, opt.snapshot, rng);
  model.exploit = active.exploit;
  model.explore = active.explore;
  report.trained = true;
  return report;
}

}  // namespace gnb
