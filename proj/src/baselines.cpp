#include "gnb/baselines.hpp"

#include "gnb/gnb_policy.hpp"
#include "gnb/rng.hpp"
#include "gnb/serialization.hpp"

namespace gnb {

namespace {
// Same tags as GnbPolicy so user networks start from identical weights across policies.
enum StreamTag : std::uint64_t { kUserInit = 1, kSnapshot = 5, kRandom = 6 };
}  // namespace

std::string to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::gnb: return "gnb";
    case PolicyKind::greedy_gnb: return "greedy_gnb";
    case PolicyKind::neural_ind: return "neural_ind";
    case PolicyKind::neural_pool: return "neural_pool";
    case PolicyKind::random: return "random";
  }
  return "unknown";
}

PolicyKind parse_policy_kind(const std::string& s) {
  if (s == "gnb") return PolicyKind::gnb;
  if (s == "greedy_gnb") return PolicyKind::greedy_gnb;
  if (s == "neural_ind") return PolicyKind::neural_ind;
  if (s == "neural_pool") return PolicyKind::neural_pool;
  if (s == "random") return PolicyKind::random;
  throw config_error("unknown policy '" + s + "'");
}

Decision random_recommend(std::span<const VectorXd> arms, std::mt19937_64& rng) {
  if (arms.empty()) throw validation_error("random_recommend: empty candidate set");
  std::uniform_int_distribution<std::size_t> pick(0, arms.size() - 1);
  Decision d;
  d.chosen_index = pick(rng);
  d.scores.resize(arms.size());
  return d;
}

RandomPolicy::RandomPolicy(std::uint64_t seed) : rng_(derive_seed({seed, kRandom})) {}

Decision RandomPolicy::recommend(Index, std::span<const VectorXd> arms) { return random_recommend(arms, rng_); }

void RandomPolicy::observe(Index, const Decision&, double reward) {
  check_reward(reward);
  ++round_;
}

nlohmann::json RandomPolicy::save() const {
  return {{"kind", name()}, {"version", kCheckpointVersion}, {"round", round_}, {"rng", rng_state(rng_)}};
}

void RandomPolicy::load(const nlohmann::json& j) {
  if (j.at("kind").get<std::string>() != name()) throw config_error("checkpoint: policy kind mismatch");
  round_ = j.at("round").get<std::int64_t>();
  restore_rng(rng_, j.at("rng").get<std::string>());
}

NeuralPolicy::NeuralPolicy(PolicyConfig config, Index users, Index context_dim, bool pooled)
    : config_(std::move(config)), users_(users), context_dim_(context_dim), pooled_(pooled) {
  config_.validate();
  if (users < 1) throw config_error("policy: need at least one user");
  const Index count = pooled ? 1 : users;
  for (Index u = 0; u < count; ++u)
    models_.emplace_back(u, context_dim, config_.pool_size, config_.width, config_.depth,
                         derive_seed({config_.seed, kUserInit, static_cast<std::uint64_t>(u)}));
  snapshot_rng_.seed(derive_seed({config_.seed, kSnapshot}));
}

UserModel& NeuralPolicy::model_for(Index user) {
  return models_[pooled_ ? 0 : static_cast<std::size_t>(user)];
}

const UserModel& NeuralPolicy::model_for(Index user) const {
  return models_[pooled_ ? 0 : static_cast<std::size_t>(user)];
}

Decision NeuralPolicy::recommend(Index user, std::span<const VectorXd> arms) {
  if (user < 0 || user >= users_) throw validation_error("recommend: user id out of range");
  bool normalized = false;
  const auto contexts = unit_contexts(arms, context_dim_, &normalized);
  const auto& model = model_for(user);

  std::vector<ArmScore> scores(contexts.size());
  std::vector<VectorXd> grads(contexts.size());
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    const auto fwd = fc_forward(model.exploit, contexts[i]);
    const auto g = pool_and_normalize(fc_backward(model.exploit, fwd.cache).values, config_.pool_size);
    scores[i] = {fwd.output, predict_gain(model, g)};
    grads[i] = g.values;
  }
  Decision d = select_arm(std::move(scores), config_.alpha);
  d.normalized_input = normalized;
  const auto c = d.chosen_index;
  pending_ = Pending{user, d, contexts[c], d.scores[c].reward, std::move(grads[c])};
  return d;
}

void NeuralPolicy::observe(Index user, const Decision& decision, double reward) {
  check_reward(reward);
  if (!pending_ || pending_->user != user || pending_->decision.chosen_index != decision.chosen_index)
    throw validation_error("observe: decision does not match the last recommendation");
  model_for(user).add_record({pending_->context, reward, pending_->prediction, pending_->gradient});
  ++round_;
  last_user_ = user;
  pending_.reset();
}

bool NeuralPolicy::maybe_train() {
  if (!should_train(round_, config_.train_burnin, config_.train_every) || last_user_ < 0) return false;
  TrainOptions opts;
  opts.eta = config_.eta1;
  opts.steps = config_.steps1;
  opts.start = config_.start;
  opts.snapshot = config_.snapshot;
  opts.snapshot_cap = config_.snapshot_cap;
  opts.reduction = config_.reduction;
  return train_user(model_for(last_user_), opts, snapshot_rng_).trained;
}

nlohmann::json NeuralPolicy::save() const {
  if (pending_) throw validation_error("save: a recommendation is still pending");
  nlohmann::json models = nlohmann::json::array();
  for (const auto& m : models_) models.push_back(user_to_json(m));
  return {{"kind", name()},       {"version", kCheckpointVersion}, {"config", to_json(config_)},
          {"users", users_},      {"context_dim", context_dim_},   {"round", round_},
          {"last_user", last_user_}, {"models", models},           {"snapshot_rng", rng_state(snapshot_rng_)}};
}

void NeuralPolicy::load(const nlohmann::json& j) {
  if (j.at("kind").get<std::string>() != name()) throw config_error("checkpoint: policy kind mismatch");
  config_ = policy_config_from_json(j.at("config"));
  users_ = j.at("users").get<Index>();
  context_dim_ = j.at("context_dim").get<Index>();
  round_ = j.at("round").get<std::int64_t>();
  last_user_ = j.at("last_user").get<Index>();
  models_.clear();
  for (const auto& m : j.at("models")) models_.push_back(user_from_json(m));
  restore_rng(snapshot_rng_, j.at("snapshot_rng").get<std::string>());
  pending_.reset();
}

std::unique_ptr<Policy> make_policy(PolicyKind kind, const PolicyConfig& config, Index users, Index context_dim) {
  switch (kind) {
    case PolicyKind::gnb: return std::make_unique<GnbPolicy>(config, users, context_dim, false);
    case PolicyKind::greedy_gnb: {
      PolicyConfig c = config;
      c.alpha = 0.0;
      return std::make_unique<GnbPolicy>(c, users, context_dim, true);
    }
    case PolicyKind::neural_ind: return std::make_unique<NeuralPolicy>(config, users, context_dim, false);
    case PolicyKind::neural_pool: return std::make_unique<NeuralPolicy>(config, users, context_dim, true);
    case PolicyKind::random: return std::make_unique<RandomPolicy>(config.seed);
  }
  throw config_error("unknown policy kind");
}

}  // namespace gnb
