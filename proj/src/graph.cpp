#include "gnb/graph.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

namespace gnb {

std::string to_string(KernelKind k) { return k == KernelKind::rbf ? "rbf" : "exp-abs"; }
std::string to_string(Normalization n) { return n == Normalization::symmetric ? "symmetric" : "uniform-scale"; }

KernelKind parse_kernel(const std::string& s) {
  if (s == "rbf") return KernelKind::rbf;
  if (s == "exp-abs") return KernelKind::exp_abs;
  throw validation_error("unknown kernel '" + s + "'");
}

Normalization parse_normalization(const std::string& s) {
  if (s == "symmetric") return Normalization::symmetric;
  if (s == "uniform-scale") return Normalization::uniform_scale;
  throw validation_error("unknown normalization '" + s + "'");
}

std::string to_string(NeighborhoodStrategy s) {
  return s == NeighborhoodStrategy::uniform_random ? "uniform-random" : "fixed-representatives";
}

NeighborhoodStrategy parse_neighborhood_strategy(const std::string& s) {
  if (s == "uniform-random") return NeighborhoodStrategy::uniform_random;
  if (s == "fixed-representatives") return NeighborhoodStrategy::fixed_representatives;
  throw validation_error("unknown neighborhood strategy '" + s + "'");
}

std::vector<Index> all_users(Index n) {
  std::vector<Index> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), Index{0});
  return ids;
}

UserGraph graph_from_values(std::span<const double> values, const Kernel& kernel, Normalization mode,
                            std::vector<Index> members) {
  if (!(kernel.gamma > 0.0)) throw validation_error("kernel bandwidth must be positive");
  const auto n = static_cast<Index>(values.size());
  if (n == 0) throw shape_error("graph_from_values: empty node set");
  if (members.empty()) members = all_users(n);
  if (static_cast<Index>(members.size()) != n) throw shape_error("graph_from_values: member list length mismatch");

  UserGraph g;
  g.n = n;
  g.mode = mode;
  g.members = std::move(members);
  g.adjacency.resize(n, n);
  for (Index i = 0; i < n; ++i) {
    g.adjacency(i, i) = 1.0;
    for (Index j = i + 1; j < n; ++j) {
      const double w = psi(values[static_cast<std::size_t>(i)], values[static_cast<std::size_t>(j)], kernel);
      g.adjacency(i, j) = w;
      g.adjacency(j, i) = w;
    }
  }
  g.normalized = normalize_adjacency(g.adjacency, mode);
  return g;
}

namespace {
std::vector<Index> resolve_members(std::span<const UserModel> users, const std::vector<Index>& members) {
  auto ids = members.empty() ? all_users(static_cast<Index>(users.size())) : members;
  for (Index id : ids)
    if (id < 0 || id >= static_cast<Index>(users.size())) throw shape_error("graph member id out of range");
  return ids;
}
}  // namespace

UserGraph build_exploitation_graph(const Eigen::Ref<const VectorXd>& x, std::span<const UserModel> users,
                                   const Kernel& kernel, Normalization mode, const std::vector<Index>& members) {
  auto ids = resolve_members(users, members);
  std::vector<double> preds;
  preds.reserve(ids.size());
  for (Index id : ids) preds.push_back(predict_reward(users[static_cast<std::size_t>(id)], x));
  return graph_from_values(preds, kernel, mode, std::move(ids));
}

UserGraph build_exploration_graph(const Eigen::Ref<const VectorXd>& x, std::span<const UserModel> users,
                                  const Kernel& kernel, Normalization mode, Index pool_size,
                                  const std::vector<Index>& members) {
  auto ids = resolve_members(users, members);
  std::vector<double> gains;
  gains.reserve(ids.size());
  for (Index id : ids) {
    const auto& u = users[static_cast<std::size_t>(id)];
    gains.push_back(predict_gain(u, pooled_gradient(u, x, pool_size)));
  }
  return graph_from_values(gains, kernel, mode, std::move(ids));
}

void write_graph_csv(std::ostream& os, const UserGraph& g) {
  os << "n," << g.n << '\n' << "mode," << to_string(g.mode) << '\n';
  const auto old_precision = os.precision(17);
  for (Index i = 0; i < g.n; ++i) {
    for (Index j = 0; j < g.n; ++j) os << (j ? "," : "") << g.adjacency(i, j);
    os << '\n';
  }
  os.precision(old_precision);
}

Neighborhood approx_neighborhood(Index target, Index n, Index n_tilde, NeighborhoodStrategy strategy,
                                 std::mt19937_64& rng, const std::vector<Index>& representatives) {
  if (n_tilde < 1) throw validation_error("approx_neighborhood: n_tilde must be >= 1");
  if (n_tilde > n) throw validation_error("approx_neighborhood: n_tilde exceeds user count");
  if (target < 0 || target >= n) throw validation_error("approx_neighborhood: target out of range");

  Neighborhood nb;
  if (n_tilde == n) {
    nb.member_ids = all_users(n);
  } else {
    nb.member_ids.push_back(target);
    std::vector<Index> pool;
    if (strategy == NeighborhoodStrategy::uniform_random) {
      pool.reserve(static_cast<std::size_t>(n - 1));
      for (Index u = 0; u < n; ++u)
        if (u != target) pool.push_back(u);
      std::sample(pool.begin(), pool.end(), std::back_inserter(nb.member_ids), n_tilde - 1, rng);
    } else {
      const auto& order = representatives.empty() ? all_users(n) : representatives;
      for (Index u : order) {
        if (static_cast<Index>(nb.member_ids.size()) == n_tilde) break;
        if (u < 0 || u >= n) throw validation_error("approx_neighborhood: representative id out of range");
        if (u != target && std::find(nb.member_ids.begin(), nb.member_ids.end(), u) == nb.member_ids.end())
          nb.member_ids.push_back(u);
      }
      if (static_cast<Index>(nb.member_ids.size()) < n_tilde)
        throw validation_error("approx_neighborhood: not enough representatives");
    }
    std::sort(nb.member_ids.begin(), nb.member_ids.end());
  }
  const auto it = std::find(nb.member_ids.begin(), nb.member_ids.end(), target);
  nb.includes_target = it != nb.member_ids.end();
  nb.target_local = static_cast<Index>(it - nb.member_ids.begin());
  return nb;
}

}  // namespace gnb
