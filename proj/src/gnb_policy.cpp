#include "gnb/gnb_policy.hpp"

#include "gnb/rng.hpp"
#include "gnb/serialization.hpp"

namespace gnb {

namespace {
enum StreamTag : std::uint64_t { kUserInit = 1, kGnnExploitInit = 2, kGnnExploreInit = 3, kNeighborhood = 4, kSnapshot = 5 };
}

GnbPolicy::GnbPolicy(PolicyConfig config, Index users, Index context_dim, bool ablate_exploration)
    : config_(std::move(config)), context_dim_(context_dim), ablate_(ablate_exploration) {
  config_.validate();
  if (users < 1) throw config_error("policy: need at least one user");
  if (context_dim < 1) throw config_error("policy: context dimension must be >= 1");
  if (config_.n_tilde > users) throw config_error("policy: n_tilde exceeds user count");

  users_.reserve(static_cast<std::size_t>(users));
  for (Index u = 0; u < users; ++u)
    users_.emplace_back(u, context_dim, config_.pool_size, config_.width, config_.depth,
                        derive_seed({config_.seed, kUserInit, static_cast<std::uint64_t>(u)}));
  gnn_.exploit = init_gnn_params(users, context_dim, config_.width, config_.depth,
                                 derive_seed({config_.seed, kGnnExploitInit}));
  if (config_.gnn_pool_size > gnn_.exploit.total_len())
    throw config_error("policy: gnn_pool_size exceeds exploitation GNN parameter count");
  gnn_.explore = init_gnn_params(users, config_.gnn_pool_size, config_.width, config_.depth,
                                 derive_seed({config_.seed, kGnnExploreInit}));
  gnn_initial_ = gnn_;
  neighborhood_rng_.seed(derive_seed({config_.seed, kNeighborhood}));
  snapshot_rng_.seed(derive_seed({config_.seed, kSnapshot}));
  exploit_data_ = GnnDataset(users * context_dim);
  explore_data_ = GnnDataset(users * config_.gnn_pool_size);
}

Decision GnbPolicy::recommend(Index user, std::span<const VectorXd> arms) {
  const Index n = user_count();
  if (user < 0 || user >= n) throw validation_error("recommend: user id out of range");
  bool normalized = false;
  const auto contexts = unit_contexts(arms, context_dim_, &normalized);

  const Index n_tilde = config_.n_tilde == 0 ? n : config_.n_tilde;
  const auto nb = approx_neighborhood(user, n, n_tilde, config_.neighborhood, neighborhood_rng_);
  const auto& members = nb.member_ids;
  last_members_ = members;

  std::vector<ArmServe> served(contexts.size());
  std::vector<MatrixXd> exploit_s(contexts.size());
  std::vector<ArmScore> scores(contexts.size());
  std::vector<double> preds(members.size());
  std::vector<double> gains(members.size());
  std::vector<PooledGradient> user_grads(members.size());

  for (std::size_t i = 0; i < contexts.size(); ++i) {
    const auto& x = contexts[i];
    ArmServe& a = served[i];
    a.context = x;
    for (std::size_t v = 0; v < members.size(); ++v) {
      const auto& model = users_[static_cast<std::size_t>(members[v])];
      const auto fwd = fc_forward(model.exploit, x);
      preds[v] = fwd.output;
      if (!ablate_) {
        user_grads[v] = pool_and_normalize(fc_backward(model.exploit, fwd.cache).values, config_.pool_size);
        gains[v] = predict_gain(model, user_grads[v]);
      }
    }
    const auto t = static_cast<std::size_t>(nb.target_local);
    a.user_prediction = preds[t];
    a.user_gradient = ablate_ ? PooledGradient{VectorXd::Zero(config_.pool_size), 0.0, true} : user_grads[t];

    const UserGraph g1 = graph_from_values(preds, config_.kernel, config_.normalization, members);
    a.g1 = fingerprint(g1.adjacency);
    a.exploit_propagation = scatter_members(propagation_row(g1.normalized, config_.k, nb.target_local), members, n);
    const VectorXd e1 = embedding_row(x, a.exploit_propagation);
    exploit_s[i] = g1.normalized;

    if (ablate_) {
      scores[i].reward = gnn_score(gnn_.exploit, e1);
      continue;
    }
    const auto tg = gnn_target_gradient(gnn_.exploit, e1);
    scores[i].reward = tg.value;
    a.gnn_gradient = pool_and_normalize(tg.raw, config_.gnn_pool_size);

    const UserGraph g2 = graph_from_values(gains, config_.kernel, config_.normalization, members);
    a.g2 = fingerprint(g2.adjacency);
    a.explore_propagation = scatter_members(propagation_row(g2.normalized, config_.k, nb.target_local), members, n);
    scores[i].gain = gnn_score(gnn_.explore, embedding_row(a.gnn_gradient.values, a.explore_propagation));
  }

  Decision d = select_arm(std::move(scores), ablate_ ? 0.0 : config_.alpha);
  d.normalized_input = normalized;
  last_spread_ = element_std(matrix_power(exploit_s[d.chosen_index], config_.k));
  pending_ = Pending{user, d, std::move(served[d.chosen_index])};
  return d;
}

void GnbPolicy::observe(Index user, const Decision& decision, double reward) {
  check_reward(reward);
  if (!pending_) throw validation_error("observe: no pending recommendation");
  if (pending_->user != user || pending_->decision.chosen_index != decision.chosen_index ||
      pending_->decision.scores.size() != decision.scores.size())
    throw validation_error("observe: decision does not match the last recommendation");

  const ArmServe& a = pending_->served;
  const ArmScore& s = pending_->decision.scores[decision.chosen_index];
  users_[static_cast<std::size_t>(user)].add_record({a.context, reward, a.user_prediction, a.user_gradient.values});

  GnbLogRecord rec;
  rec.round = round_ + 1;
  rec.user = user;
  rec.context = a.context;
  rec.exploit_propagation = a.exploit_propagation;
  rec.explore_propagation = a.explore_propagation;
  rec.gnn_gradient = a.gnn_gradient.values;
  rec.served_reward = s.reward;
  rec.served_gain = s.gain;
  rec.reward = reward;
  rec.params_version = version_;
  rec.exploit_graph_fingerprint = a.g1;
  rec.explore_graph_fingerprint = a.g2;

  exploit_data_.add(embedding_row(rec.context, rec.exploit_propagation), reward);
  if (!ablate_) explore_data_.add(embedding_row(rec.gnn_gradient, rec.explore_propagation), reward - rec.served_reward);
  log_.push_back(std::move(rec));

  ++round_;
  last_user_ = user;
  pending_.reset();
}

bool GnbPolicy::maybe_train() {
  if (!should_train(round_, config_.train_burnin, config_.train_every) || last_user_ < 0) return false;

  TrainOptions user_opts;
  user_opts.eta = config_.eta1;
  user_opts.steps = config_.steps1;
  user_opts.start = config_.start;
  user_opts.snapshot = config_.snapshot;
  user_opts.snapshot_cap = config_.snapshot_cap;
  user_opts.reduction = config_.reduction;
  user_opts.train_exploration = !ablate_;
  train_user(users_[static_cast<std::size_t>(last_user_)], user_opts, snapshot_rng_);

  const bool cold = config_.start == StartMode::cold;
  GnnPair next;
  next.exploit = train_gnn(cold ? gnn_initial_.exploit : gnn_.exploit, exploit_data_.embeddings(), exploit_data_.labels(),
                           config_.eta2, config_.steps2, config_.reduction);
  next.explore = ablate_ ? gnn_.explore
                         : train_gnn(cold ? gnn_initial_.explore : gnn_.explore, explore_data_.embeddings(),
                                     explore_data_.labels(), config_.eta2, config_.steps2, config_.reduction);
  gnn_snapshots_.push_back(std::move(next));
  while (gnn_snapshots_.size() > config_.snapshot_cap) gnn_snapshots_.pop_front();
  gnn_ = select_snapshot(gnn_snapshots_, config_.snapshot, snapshot_rng_);
  ++version_;
  return true;
}

void GnbPolicy::rebuild_datasets() {
  exploit_data_ = GnnDataset(user_count() * context_dim_);
  explore_data_ = GnnDataset(user_count() * config_.gnn_pool_size);
  for (const auto& rec : log_) {
    exploit_data_.add(embedding_row(rec.context, rec.exploit_propagation), rec.reward);
    if (!ablate_) explore_data_.add(embedding_row(rec.gnn_gradient, rec.explore_propagation), rec.reward - rec.served_reward);
  }
}

nlohmann::json GnbPolicy::save() const {
  if (pending_) throw validation_error("save: a recommendation is still pending");
  nlohmann::json users = nlohmann::json::array();
  for (const auto& u : users_) users.push_back(user_to_json(u));
  nlohmann::json snaps = nlohmann::json::array();
  for (const auto& s : gnn_snapshots_) snaps.push_back({gnn_to_json(s.exploit), gnn_to_json(s.explore)});
  nlohmann::json log = nlohmann::json::array();
  for (const auto& r : log_)
    log.push_back({{"round", r.round},
                   {"user", r.user},
                   {"x", vector_to_json(r.context)},
                   {"s1", vector_to_json(r.exploit_propagation)},
                   {"s2", vector_to_json(r.explore_propagation)},
                   {"g", vector_to_json(r.gnn_gradient)},
                   {"r_hat", r.served_reward},
                   {"b_hat", r.served_gain},
                   {"reward", r.reward},
                   {"version", r.params_version},
                   {"fp1", r.exploit_graph_fingerprint},
                   {"fp2", r.explore_graph_fingerprint}});
  return {{"kind", name()},
          {"version", kCheckpointVersion},
          {"config", to_json(config_)},
          {"context_dim", context_dim_},
          {"round", round_},
          {"last_user", last_user_},
          {"params_version", version_},
          {"users", users},
          {"gnn", {gnn_to_json(gnn_.exploit), gnn_to_json(gnn_.explore)}},
          {"gnn_initial", {gnn_to_json(gnn_initial_.exploit), gnn_to_json(gnn_initial_.explore)}},
          {"gnn_snapshots", snaps},
          {"log", log},
          {"neighborhood_rng", rng_state(neighborhood_rng_)},
          {"snapshot_rng", rng_state(snapshot_rng_)},
          {"last_spread", std::isnan(last_spread_) ? nlohmann::json(nullptr) : nlohmann::json(last_spread_)}};
}

void GnbPolicy::load(const nlohmann::json& j) {
  if (j.at("version").get<int>() != kCheckpointVersion) throw config_error("checkpoint: unsupported version");
  if (j.at("kind").get<std::string>() != name()) throw config_error("checkpoint: policy kind mismatch");
  config_ = policy_config_from_json(j.at("config"));
  context_dim_ = j.at("context_dim").get<Index>();
  round_ = j.at("round").get<std::int64_t>();
  last_user_ = j.at("last_user").get<Index>();
  version_ = j.at("params_version").get<std::uint64_t>();
  users_.clear();
  for (const auto& u : j.at("users")) users_.push_back(user_from_json(u));
  gnn_ = {gnn_from_json(j.at("gnn").at(0)), gnn_from_json(j.at("gnn").at(1))};
  gnn_initial_ = {gnn_from_json(j.at("gnn_initial").at(0)), gnn_from_json(j.at("gnn_initial").at(1))};
  gnn_snapshots_.clear();
  for (const auto& s : j.at("gnn_snapshots")) gnn_snapshots_.push_back({gnn_from_json(s.at(0)), gnn_from_json(s.at(1))});
  log_.clear();
  for (const auto& r : j.at("log")) {
    GnbLogRecord rec;
    rec.round = r.at("round").get<std::int64_t>();
    rec.user = r.at("user").get<Index>();
    rec.context = vector_from_json(r.at("x"));
    rec.exploit_propagation = vector_from_json(r.at("s1"));
    rec.explore_propagation = vector_from_json(r.at("s2"));
    rec.gnn_gradient = vector_from_json(r.at("g"));
    rec.served_reward = r.at("r_hat").get<double>();
    rec.served_gain = r.at("b_hat").get<double>();
    rec.reward = r.at("reward").get<double>();
    rec.params_version = r.at("version").get<std::uint64_t>();
    rec.exploit_graph_fingerprint = r.at("fp1").get<std::uint64_t>();
    rec.explore_graph_fingerprint = r.at("fp2").get<std::uint64_t>();
    log_.push_back(std::move(rec));
  }
  restore_rng(neighborhood_rng_, j.at("neighborhood_rng").get<std::string>());
  restore_rng(snapshot_rng_, j.at("snapshot_rng").get<std::string>());
  last_spread_ = j.at("last_spread").is_null() ? std::numeric_limits<double>::quiet_NaN() : j.at("last_spread").get<double>();
  pending_.reset();
  rebuild_datasets();
}

}  // namespace gnb
