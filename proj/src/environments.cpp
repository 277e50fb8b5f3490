#include "gnb/environments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>
#include <utility>

#include <boost/algorithm/string.hpp>

#include "gnb/rng.hpp"

namespace gnb {

namespace {

enum StreamTag : std::uint64_t { kEnvStream = 10, kLatents = 11 };

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  boost::split(cells, line, boost::is_any_of(","));
  for (auto& c : cells) boost::trim(c);
  return cells;
}

double parse_double(const std::string& cell, const std::string& file, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size() || !std::isfinite(v)) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw parse_error(file, line, "not a finite number: '" + cell + "'");
  }
}

VectorXd random_unit(Index d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  VectorXd v(d);
  do {
    for (Index i = 0; i < d; ++i) v(i) = normal(rng);
  } while (v.norm() == 0.0);
  return v / v.norm();
}

}  // namespace

OracleView make_oracle(VectorXd expected, bool is_oracle) {
  OracleView o;
  o.best_value = expected.size() ? expected.maxCoeff() : 0.0;
  o.expected_rewards = std::move(expected);
  o.is_oracle = is_oracle;
  return o;
}

std::string to_string(LinkKind k) { return k == LinkKind::sigmoid_dot ? "sigmoid-dot" : "cosine-affinity"; }
std::string to_string(NoiseKind k) { return k == NoiseKind::bernoulli ? "bernoulli" : "clamped-gaussian"; }

LinkKind parse_link(const std::string& s) {
  if (s == "sigmoid-dot") return LinkKind::sigmoid_dot;
  if (s == "cosine-affinity") return LinkKind::cosine_affinity;
  throw config_error("unknown link '" + s + "'");
}

NoiseKind parse_noise(const std::string& s) {
  if (s == "bernoulli") return NoiseKind::bernoulli;
  if (s == "clamped-gaussian") return NoiseKind::clamped_gaussian;
  throw config_error("unknown noise '" + s + "'");
}

void SyntheticConfig::validate() const {
  if (users < 1 || dim < 1 || arms < 1) throw config_error("synthetic: users, dim and arms must be >= 1");
  if (groups < 1 || groups > users) throw config_error("synthetic: groups must lie in [1, users]");
  if (!(rho > 0.0)) throw config_error("synthetic: rho must be positive");
  if (!(sigma >= 0.0)) throw config_error("synthetic: sigma must be >= 0");
  if (!(jitter >= 0.0)) throw config_error("synthetic: jitter must be >= 0");
  if (max_attempts < 1) throw config_error("synthetic: max_attempts must be >= 1");
}

nlohmann::json to_json(const SyntheticConfig& c) {
  return {{"users", c.users}, {"dim", c.dim},   {"arms", c.arms},   {"groups", c.groups},
          {"jitter", c.jitter}, {"link", to_string(c.link)}, {"logit_scale", c.logit_scale},
          {"noise", to_string(c.noise)}, {"sigma", c.sigma}, {"rho", c.rho}, {"seed", c.seed}};
}

SyntheticEnv::SyntheticEnv(SyntheticConfig config) : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 latent_rng(derive_seed({config_.seed, kLatents}));
  std::vector<VectorXd> centers;
  for (Index g = 0; g < config_.groups; ++g) centers.push_back(random_unit(config_.dim, latent_rng));
  latents_.resize(config_.users, config_.dim);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index u = 0; u < config_.users; ++u) {
    VectorXd v = centers[static_cast<std::size_t>(u % config_.groups)];
    if (config_.jitter > 0.0)
      for (Index i = 0; i < config_.dim; ++i) v(i) += config_.jitter * normal(latent_rng);
    latents_.row(u) = (v / v.norm()).transpose();
  }
  rng_.seed(derive_seed({config_.seed, kEnvStream}));
}

SyntheticEnv::SyntheticEnv(SyntheticConfig config, MatrixXd latents) : config_(std::move(config)), latents_(std::move(latents)) {
  config_.users = latents_.rows();
  config_.dim = latents_.cols();
  config_.validate();
  rng_.seed(derive_seed({config_.seed, kEnvStream}));
}

double SyntheticEnv::expected_reward(Index user, const Eigen::Ref<const VectorXd>& x) const {
  const double dot = latents_.row(user).dot(x);
  if (config_.link == LinkKind::sigmoid_dot) return 1.0 / (1.0 + std::exp(-config_.logit_scale * dot));
  return std::clamp(0.5 * (1.0 + dot), 0.0, 1.0);
}

double SyntheticEnv::synth_reward(Index user, const Eigen::Ref<const VectorXd>& x) {
  const double mu = expected_reward(user, x);
  if (config_.noise == NoiseKind::bernoulli) return std::bernoulli_distribution(mu)(rng_) ? 1.0 : 0.0;
  if (config_.sigma == 0.0) return mu;
  std::normal_distribution<double> noise(0.0, config_.sigma);
  return std::clamp(mu + noise(rng_), 0.0, 1.0);
}

Round SyntheticEnv::next_round() {
  Round r;
  r.user = std::uniform_int_distribution<Index>(0, config_.users - 1)(rng_);
  while (static_cast<Index>(r.arms.size()) < config_.arms) {
    bool placed = false;
    for (int attempt = 0; attempt < config_.max_attempts && !placed; ++attempt) {
      VectorXd x = random_unit(config_.dim, rng_);
      placed = std::all_of(r.arms.begin(), r.arms.end(), [&](const VectorXd& y) { return (x - y).norm() >= config_.rho; });
      if (placed) r.arms.push_back(std::move(x));
    }
    if (!placed) throw validation_error("synthetic: could not place arms with separation rho; rho too large");
  }
  VectorXd mu(config_.arms);
  for (Index i = 0; i < config_.arms; ++i) mu(i) = expected_reward(r.user, r.arms[static_cast<std::size_t>(i)]);
  r.oracle = make_oracle(std::move(mu));
  ++round_;
  current_ = r;
  return r;
}

double SyntheticEnv::reward(std::size_t arm_index) {
  if (arm_index >= current_.arms.size()) throw validation_error("reward: arm index out of range");
  return synth_reward(current_.user, current_.arms[arm_index]);
}

UserGraph SyntheticEnv::true_exploitation_graph(const Eigen::Ref<const VectorXd>& x, const Kernel& kernel,
                                                Normalization mode) const {
  std::vector<double> mu(static_cast<std::size_t>(config_.users));
  for (Index u = 0; u < config_.users; ++u) mu[static_cast<std::size_t>(u)] = expected_reward(u, x);
  return graph_from_values(mu, kernel, mode);
}

UserGraph true_exploitation_graph(const Environment& env, const Eigen::Ref<const VectorXd>& x, const Kernel& kernel,
                                  Normalization mode) {
  const auto* synthetic = dynamic_cast<const SyntheticEnv*>(&env);
  if (!synthetic) throw unsupported_oracle("true_exploitation_graph: environment '" + env.name() + "' has no latent model");
  return synthetic->true_exploitation_graph(x, kernel, mode);
}

nlohmann::json SyntheticEnv::save() const {
  return {{"kind", name()}, {"round", round_}, {"rng", rng_state(rng_)}, {"latents_rows", latents_.rows()}};
}

void SyntheticEnv::load(const nlohmann::json& j) {
  if (j.at("kind").get<std::string>() != name()) throw config_error("checkpoint: environment kind mismatch");
  round_ = j.at("round").get<std::int64_t>();
  restore_rng(rng_, j.at("rng").get<std::string>());
  current_ = Round{};
}

std::vector<LabeledSample> load_classification_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open classification file " + path.string());
  const std::string file = path.string();
  std::vector<LabeledSample> samples;
  std::string line;
  std::size_t lineno = 0;
  Index width = -1;
  bool first_row = true;
  while (std::getline(in, line)) {
    ++lineno;
    boost::trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split_csv(line);
    const bool first = std::exchange(first_row, false);
    if (first && cells[0] == "label") continue;  // optional header
    if (cells.size() < 2) throw parse_error(file, lineno, "expected label and at least one feature");
    const double label = parse_double(cells[0], file, lineno);
    if (label < 0 || label != std::floor(label)) throw parse_error(file, lineno, "label must be a non-negative integer");
    LabeledSample s;
    s.label = static_cast<Index>(label);
    s.features.resize(static_cast<Index>(cells.size()) - 1);
    for (std::size_t i = 1; i < cells.size(); ++i) s.features(static_cast<Index>(i) - 1) = parse_double(cells[i], file, lineno);
    if (width >= 0 && s.features.size() != width) throw parse_error(file, lineno, "inconsistent feature count");
    width = s.features.size();
    samples.push_back(std::move(s));
  }
  if (samples.empty()) throw config_error("classification file " + file + " has no samples");
  return samples;
}

ClassificationEnv::ClassificationEnv(std::vector<LabeledSample> samples, Index classes, std::uint64_t seed)
    : samples_(std::move(samples)), classes_(classes), rng_(derive_seed({seed, kEnvStream})) {
  if (samples_.empty()) throw validation_error("classification: empty dataset");
  if (classes_ < 1) throw validation_error("classification: need at least one class");
  feature_dim_ = samples_.front().features.size();
  for (auto& s : samples_) {
    if (s.features.size() != feature_dim_) throw validation_error("classification: inconsistent feature count");
    if (s.label < 0 || s.label >= classes_) throw validation_error("classification: label out of range");
    const double n = s.features.norm();
    if (!(n > 0.0)) throw validation_error("classification: zero feature vector");
    s.features /= n;
  }
  reshuffle();
}

void ClassificationEnv::reshuffle() {
  order_.resize(samples_.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::shuffle(order_.begin(), order_.end(), rng_);
  cursor_ = 0;
}

VectorXd ClassificationEnv::embed_arm(const Eigen::Ref<const VectorXd>& x, Index arm, Index classes) {
  VectorXd v = VectorXd::Zero(x.size() + classes - 1);
  v.segment(arm, x.size()) = x;
  return v / v.norm();
}

VectorXd ClassificationEnv::strip_arm(const Eigen::Ref<const VectorXd>& arm_context, Index arm, Index feature_dim) {
  return arm_context.segment(arm, feature_dim);
}

Round ClassificationEnv::next_round() {
  if (cursor_ == order_.size()) reshuffle();
  const auto& s = samples_[order_[cursor_++]];
  Round r;
  r.user = s.label;
  current_label_ = s.label;
  for (Index c = 0; c < classes_; ++c) r.arms.push_back(embed_arm(s.features, c, classes_));
  VectorXd oracle = VectorXd::Zero(classes_);
  oracle(s.label) = 1.0;
  r.oracle = make_oracle(std::move(oracle));
  return r;
}

double ClassificationEnv::reward(std::size_t arm_index) {
  if (static_cast<Index>(arm_index) >= classes_) throw validation_error("reward: arm index out of range");
  return static_cast<Index>(arm_index) == current_label_ ? 1.0 : 0.0;
}

nlohmann::json ClassificationEnv::save() const {
  return {{"kind", name()}, {"rng", rng_state(rng_)}, {"order", order_}, {"cursor", cursor_}};
}

void ClassificationEnv::load(const nlohmann::json& j) {
  if (j.at("kind").get<std::string>() != name()) throw config_error("checkpoint: environment kind mismatch");
  restore_rng(rng_, j.at("rng").get<std::string>());
  order_ = j.at("order").get<std::vector<std::size_t>>();
  cursor_ = j.at("cursor").get<std::size_t>();
}

FeatureFileEnv::FeatureFileEnv(const std::filesystem::path& features, const std::filesystem::path& interactions,
                               Index arms_per_round, std::uint64_t seed)
    : arms_per_round_(arms_per_round), rng_(derive_seed({seed, kEnvStream})) {
  if (arms_per_round < 1) throw config_error("feature_file: arms_per_round must be >= 1");
  std::unordered_map<std::string, Index> user_index, arm_index;
  std::vector<VectorXd> user_rows, arm_rows;
  {
    std::ifstream in(features);
    if (!in) throw config_error("cannot open features file " + features.string());
    const std::string file = features.string();
    std::string line;
    std::size_t lineno = 0;
    std::size_t columns = 0;
    while (std::getline(in, line)) {
      ++lineno;
      boost::trim(line);
      if (line.empty()) continue;
      const auto cells = split_csv(line);
      if (columns == 0) {
        if (cells.size() < 3 || cells[0] != "kind" || cells[1] != "id")
          throw parse_error(file, lineno, "header must be 'kind,id,<feature columns>'");
        columns = cells.size();
        dim_ = static_cast<Index>(columns) - 2;
        continue;
      }
      if (cells.size() != columns)
        throw parse_error(file, lineno, "expected " + std::to_string(columns) + " columns, found " + std::to_string(cells.size()));
      VectorXd f(dim_);
      for (Index i = 0; i < dim_; ++i) f(i) = parse_double(cells[static_cast<std::size_t>(i) + 2], file, lineno);
      if (cells[0] == "user") {
        if (!user_index.emplace(cells[1], static_cast<Index>(user_ids_.size())).second)
          throw parse_error(file, lineno, "duplicate user id '" + cells[1] + "'");
        user_ids_.push_back(cells[1]);
        user_rows.push_back(f);
      } else if (cells[0] == "arm") {
        const double n = f.norm();
        if (!(n > 0.0)) throw parse_error(file, lineno, "arm features must be non-zero");
        if (!arm_index.emplace(cells[1], static_cast<Index>(arm_ids_.size())).second)
          throw parse_error(file, lineno, "duplicate arm id '" + cells[1] + "'");
        arm_ids_.push_back(cells[1]);
        arm_rows.push_back(f / n);
      } else {
        throw parse_error(file, lineno, "kind must be 'user' or 'arm', found '" + cells[0] + "'");
      }
    }
    if (columns == 0) throw parse_error(file, lineno, "missing header");
    if (user_ids_.empty() || arm_ids_.empty()) throw config_error("features file needs at least one user and one arm");
  }
  user_features_.resize(static_cast<Index>(user_rows.size()), dim_);
  for (std::size_t i = 0; i < user_rows.size(); ++i) user_features_.row(static_cast<Index>(i)) = user_rows[i].transpose();
  arm_features_.resize(static_cast<Index>(arm_rows.size()), dim_);
  for (std::size_t i = 0; i < arm_rows.size(); ++i) arm_features_.row(static_cast<Index>(i)) = arm_rows[i].transpose();

  std::ifstream in(interactions);
  if (!in) throw config_error("cannot open interactions file " + interactions.string());
  const std::string file = interactions.string();
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    boost::trim(line);
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (!header) {
      if (cells.size() != 3 || cells[0] != "user_id" || cells[1] != "arm_id" || cells[2] != "reward")
        throw parse_error(file, lineno, "header must be 'user_id,arm_id,reward'");
      header = true;
      continue;
    }
    if (cells.size() != 3) throw parse_error(file, lineno, "expected 3 columns");
    const auto u = user_index.find(cells[0]);
    if (u == user_index.end()) throw parse_error(file, lineno, "unknown user id '" + cells[0] + "'");
    const auto a = arm_index.find(cells[1]);
    if (a == arm_index.end()) throw parse_error(file, lineno, "unknown arm id '" + cells[1] + "'");
    const double r = parse_double(cells[2], file, lineno);
    if (r < 0.0 || r > 1.0) throw parse_error(file, lineno, "reward " + cells[2] + " outside [0,1]");
    if (r > 0.0) positives_.push_back(interactions_.size());
    interactions_.push_back({u->second, a->second, r});
  }
  if (!header) throw parse_error(file, lineno, "missing header");
  if (positives_.empty()) throw config_error("interactions file has no positive (reward > 0) record");
}

double FeatureFileEnv::recorded_reward(Index user, Index arm) const {
  double r = 0.0;
  for (const auto& it : interactions_)
    if (it.user == user && it.arm == arm) r = it.reward;
  return r;
}

Round FeatureFileEnv::next_round() {
  const auto& pos = interactions_[positives_[std::uniform_int_distribution<std::size_t>(0, positives_.size() - 1)(rng_)]];
  std::unordered_set<Index> liked;
  std::unordered_map<Index, double> recorded;
  for (const auto& it : interactions_) {
    if (it.user != pos.user) continue;
    recorded[it.arm] = it.reward;
    if (it.reward > 0.0) liked.insert(it.arm);
  }
  std::vector<Index> negatives;
  for (Index a = 0; a < arm_features_.rows(); ++a)
    if (!liked.count(a)) negatives.push_back(a);
  std::vector<Index> chosen{pos.arm};
  std::sample(negatives.begin(), negatives.end(), std::back_inserter(chosen),
              std::min<std::size_t>(negatives.size(), static_cast<std::size_t>(arms_per_round_ - 1)), rng_);
  std::shuffle(chosen.begin(), chosen.end(), rng_);

  Round r;
  r.user = pos.user;
  current_rewards_.resize(static_cast<Index>(chosen.size()));
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    r.arms.push_back(arm_features_.row(chosen[i]).transpose());
    const auto rec = recorded.find(chosen[i]);
    current_rewards_(static_cast<Index>(i)) = rec == recorded.end() ? 0.0 : rec->second;
  }
  r.oracle = make_oracle(current_rewards_, false);
  return r;
}

double FeatureFileEnv::reward(std::size_t arm_index) {
  if (static_cast<Index>(arm_index) >= current_rewards_.size()) throw validation_error("reward: arm index out of range");
  return current_rewards_(static_cast<Index>(arm_index));
}

nlohmann::json FeatureFileEnv::save() const { return {{"kind", name()}, {"rng", rng_state(rng_)}}; }

void FeatureFileEnv::load(const nlohmann::json& j) {
  if (j.at("kind").get<std::string>() != name()) throw config_error("checkpoint: environment kind mismatch");
  restore_rng(rng_, j.at("rng").get<std::string>());
}

}  // namespace gnb
