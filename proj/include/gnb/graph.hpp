#pragma once

#include <cmath>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gnb/numerics.hpp"
#include "gnb/user_models.hpp"

namespace gnb {

enum class KernelKind { rbf, exp_abs };
enum class Normalization { symmetric, uniform_scale };

std::string to_string(KernelKind k);
std::string to_string(Normalization n);
KernelKind parse_kernel(const std::string& s);
Normalization parse_normalization(const std::string& s);

struct Kernel {
  KernelKind kind = KernelKind::rbf;
  double gamma = 1.0;
};

// rbf: exp(-gamma (a-b)^2); exp_abs: exp(-gamma |a-b|). Both lie in (0, 1].
template <typename Scalar>
Scalar psi(Scalar a, Scalar b, Scalar gamma, KernelKind kind = KernelKind::rbf) {
  const Scalar diff = a - b;
  return kind == KernelKind::rbf ? std::exp(-gamma * diff * diff) : std::exp(-gamma * std::abs(diff));
}

inline double psi(double a, double b, const Kernel& k) { return psi(a, b, k.gamma, k.kind); }

// symmetric: D^{-1/2} A D^{-1/2}; uniform_scale: A / n.
template <typename Derived>
Matrix<typename Derived::Scalar> normalize_adjacency(const Eigen::MatrixBase<Derived>& a, Normalization mode) {
  using Scalar = typename Derived::Scalar;
  if (a.rows() != a.cols() || a.rows() == 0) throw shape_error("normalize_adjacency: adjacency must be square and non-empty");
  if (mode == Normalization::uniform_scale) return a / static_cast<Scalar>(a.rows());
  const Vector<Scalar> degree = a.rowwise().sum();
  if ((degree.array() <= Scalar(0)).any()) throw validation_error("normalize_adjacency: degenerate graph (zero row sum)");
  // a_ij / sqrt(d_i d_j): the degree product commutes, so S is exactly symmetric
  const Matrix<Scalar> scale = (degree * degree.transpose()).cwiseSqrt();
  Matrix<Scalar> s = a.cwiseQuotient(scale);
  if (!s.array().isFinite().all()) throw numeric_error("normalize_adjacency: non-finite entries");
  return s;
}

// S^k by repeated multiplication.
template <typename Derived>
Matrix<typename Derived::Scalar> matrix_power(const Eigen::MatrixBase<Derived>& s, int k) {
  if (k < 1) throw validation_error("matrix_power: k must be >= 1");
  Matrix<typename Derived::Scalar> p = s;
  for (int i = 1; i < k; ++i) p = p * s;
  return p;
}

// Row `row` of S^k, as a column vector, via k vector-matrix products.
template <typename Derived>
Vector<typename Derived::Scalar> propagation_row(const Eigen::MatrixBase<Derived>& s, int k, Index row) {
  if (k < 1) throw validation_error("propagation_row: k must be >= 1");
  if (row < 0 || row >= s.rows()) throw shape_error("propagation_row: row index out of range");
  Eigen::Matrix<typename Derived::Scalar, 1, Eigen::Dynamic> r = s.row(row);
  for (int i = 1; i < k; ++i) r = r * s;
  return r.transpose();
}

// Population standard deviation over all entries.
template <typename Derived>
typename Derived::Scalar element_std(const Eigen::MatrixBase<Derived>& m) {
  const auto mean = m.mean();
  return std::sqrt((m.array() - mean).square().mean());
}

struct UserGraph {
  Index n = 0;
  MatrixXd adjacency;
  MatrixXd normalized;
  Normalization mode = Normalization::symmetric;
  std::vector<Index> members;  // global user id of each node
};

// Kernel graph over per-node scalar values; each unordered pair is evaluated once.
UserGraph graph_from_values(std::span<const double> values, const Kernel& kernel, Normalization mode,
                            std::vector<Index> members = {});

std::vector<Index> all_users(Index n);

UserGraph build_exploitation_graph(const Eigen::Ref<const VectorXd>& x, std::span<const UserModel> users,
                                   const Kernel& kernel, Normalization mode, const std::vector<Index>& members = {});

UserGraph build_exploration_graph(const Eigen::Ref<const VectorXd>& x, std::span<const UserModel> users,
                                  const Kernel& kernel, Normalization mode, Index pool_size,
                                  const std::vector<Index>& members = {});

// Debug dump: "n,<n>", "mode,<mode>", then n adjacency rows.
void write_graph_csv(std::ostream& os, const UserGraph& g);

enum class NeighborhoodStrategy { uniform_random, fixed_representatives };
std::string to_string(NeighborhoodStrategy s);
NeighborhoodStrategy parse_neighborhood_strategy(const std::string& s);

struct Neighborhood {
  std::vector<Index> member_ids;  // ascending
  bool includes_target = false;
  Index target_local = 0;  // position of the target in member_ids
};

// n_tilde users including `target`. uniform_random samples the others without
// replacement; fixed_representatives takes the first entries of `representatives`
// (ascending ids when empty) that are not the target. n_tilde == n never touches rng.
Neighborhood approx_neighborhood(Index target, Index n, Index n_tilde, NeighborhoodStrategy strategy,
                                 std::mt19937_64& rng, const std::vector<Index>& representatives = {});

}  // namespace gnb
