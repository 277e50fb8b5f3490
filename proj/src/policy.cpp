#include "gnb/policy.hpp"

#include <cmath>

namespace gnb {

void PolicyConfig::validate() const {
  auto fail = [](const std::string& what) { throw config_error("policy: " + what); };
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail("alpha must lie in [0,1]");
  if (k < 1) fail("k must be >= 1");
  if (!(kernel.gamma > 0.0)) fail("gamma must be positive");
  if (width < 1) fail("width m must be >= 1");
  if (depth < 1) fail("depth L must be >= 1");
  if (!(eta1 > 0.0) || !(eta2 > 0.0)) fail("learning rates must be positive");
  if (steps1 < 0 || steps2 < 0) fail("training steps must be >= 0");
  if (pool_size < 1 || gnn_pool_size < 1) fail("pool sizes must be >= 1");
  if (n_tilde < 0) fail("n_tilde must be >= 0");
  if (train_every < 1) fail("train_every must be >= 1");
  if (train_burnin < 0) fail("train_burnin must be >= 0");
  if (snapshot_cap < 1) fail("snapshot_cap must be >= 1");
}

nlohmann::json to_json(const PolicyConfig& c) {
  return {
      {"alpha", c.alpha},
      {"k", c.k},
      {"kernel", to_string(c.kernel.kind)},
      {"gamma", c.kernel.gamma},
      {"normalization", to_string(c.normalization)},
      {"m", c.width},
      {"L", c.depth},
      {"eta1", c.eta1},
      {"eta2", c.eta2},
      {"J1", c.steps1},
      {"J2", c.steps2},
      {"pool_size", c.pool_size},
      {"gnn_pool_size", c.gnn_pool_size},
      {"n_tilde", c.n_tilde},
      {"neighborhood", to_string(c.neighborhood)},
      {"train_every", c.train_every},
      {"train_burnin", c.train_burnin},
      {"snapshot_mode", to_string(c.snapshot)},
      {"warm_start", to_string(c.start)},
      {"snapshot_cap", c.snapshot_cap},
      {"loss_reduction", c.reduction == LossReduction::sum ? "sum" : "mean"},
      {"seed", c.seed},
  };
}

PolicyConfig policy_config_from_json(const nlohmann::json& j) {
  PolicyConfig c;
  c.alpha = j.at("alpha").get<double>();
  c.k = j.at("k").get<int>();
  c.kernel.kind = parse_kernel(j.at("kernel").get<std::string>());
  c.kernel.gamma = j.at("gamma").get<double>();
  c.normalization = parse_normalization(j.at("normalization").get<std::string>());
  c.width = j.at("m").get<Index>();
  c.depth = j.at("L").get<int>();
  c.eta1 = j.at("eta1").get<double>();
  c.eta2 = j.at("eta2").get<double>();
  c.steps1 = j.at("J1").get<int>();
  c.steps2 = j.at("J2").get<int>();
  c.pool_size = j.at("pool_size").get<Index>();
  c.gnn_pool_size = j.at("gnn_pool_size").get<Index>();
  c.n_tilde = j.at("n_tilde").get<Index>();
  c.neighborhood = parse_neighborhood_strategy(j.at("neighborhood").get<std::string>());
  c.train_every = j.at("train_every").get<std::int64_t>();
  c.train_burnin = j.at("train_burnin").get<std::int64_t>();
  c.snapshot = parse_snapshot_mode(j.at("snapshot_mode").get<std::string>());
  c.start = parse_start_mode(j.at("warm_start").get<std::string>());
  c.snapshot_cap = j.at("snapshot_cap").get<std::size_t>();
  c.reduction = j.at("loss_reduction").get<std::string>() == "mean" ? LossReduction::mean : LossReduction::sum;
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

bool should_train(std::int64_t round, std::int64_t burnin, std::int64_t every) {
  if (round < 1) return false;
  if (round <= burnin) return true;
  return round % every == 0;
}

Decision select_arm(std::vector<ArmScore> scores, double alpha) {
  if (scores.empty()) throw validation_error("select_arm: empty candidate set");
  Decision d;
  double best = scores[0].reward + alpha * scores[0].gain;
  bool tie = false;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    const double v = scores[i].reward + alpha * scores[i].gain;
    if (v > best) {
      best = v;
      d.chosen_index = i;
      tie = false;
    } else if (v == best) {
      tie = true;
    }
  }
  d.tie_broken = tie;
  d.scores = std::move(scores);
  return d;
}

std::vector<VectorXd> unit_contexts(std::span<const VectorXd> arms, Index dim, bool* normalized) {
  if (arms.empty()) throw validation_error("empty candidate set");
  std::vector<VectorXd> out;
  out.reserve(arms.size());
  bool any = false;
  for (const auto& x : arms) {
    if (x.size() != dim) throw shape_error("arm context has dimension " + std::to_string(x.size()) + ", expected " + std::to_string(dim));
    const double n = x.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw validation_error("arm context must be finite and non-zero");
    if (std::abs(n - 1.0) > 1e-6) {
      out.push_back(x / n);
      any = true;
    } else {
      out.push_back(x);
    }
  }
  if (normalized) *normalized = any;
  return out;
}

void check_reward(double reward) {
  if (!(reward >= 0.0 && reward <= 1.0)) throw validation_error("reward " + std::to_string(reward) + " outside [0,1]");
}

}  // namespace gnb
