#pragma once

// Graph models over per-arm user graphs.
//
// For an arm input v (length q) replicated once per user, the model computes
//   H_agg    = relu(S^k (X theta_agg))       X: block-diagonal embedding (n x nq)
//   H_l      = relu(H_{l-1} W_l^T)           l = 1 .. L-1
//   per_user = H_{L-1} W_L^T
// theta_agg is (n q x m); the rows of user u form block u. Only the row of S^k
// belonging to the target user reaches the target output, so scoring and
// training run on the "embedding row" e = kron(s, v), s = row_u(S^k), which
// turns the target output into an ordinary bias-free MLP evaluated at e.

#include <random>
#include <vector>

#include "gnb/graph.hpp"
#include "gnb/numerics.hpp"
#include "gnb/user_models.hpp"

namespace gnb {

struct GnnParams {
  Index users = 0;
  Index input_dim = 0;  // q
  Index width = 0;      // m
  MatrixXd agg;         // (users * q) x m
  FcParamsD head;       // [(m,m) x (L-1), (m,1)]

  Index total_len() const { return agg.size() + head.total_len(); }
  int depth() const { return static_cast<int>(head.depth()); }

  // row-major theta_agg, then the head layers
  VectorXd flatten() const;
  static GnnParams unflatten(Index users, Index input_dim, Index width, int depth, const Eigen::Ref<const VectorXd>& flat);

  friend bool operator==(const GnnParams& a, const GnnParams& b) {
    return a.users == b.users && a.input_dim == b.input_dim && a.width == b.width && a.agg == b.agg && a.head == b.head;
  }
};

std::vector<LayerDim> gnn_head_dims(Index width, int depth);

// theta_agg and hidden head layers ~ N(0, 2/m); last head layer ~ N(0, 1/m).
GnnParams init_gnn_params(Index users, Index input_dim, Index width, int depth, std::mt19937_64& rng);
GnnParams init_gnn_params(Index users, Index input_dim, Index width, int depth, std::uint64_t seed);

// n x nq matrix with input^T repeated along the block diagonal.
MatrixXd build_embedding_matrix(const Eigen::Ref<const VectorXd>& input, Index n);

struct GnnOutput {
  VectorXd per_user;
  double target_value = 0.0;
  Index target = 0;
  // forward cache
  MatrixXd propagated;                 // S^k X theta_agg, pre-activation
  std::vector<MatrixXd> hidden;        // H_0 .. H_{L-1}
};

// Full per-user forward over the node set `members` (all users when empty);
// S is |members| x |members| and `target` indexes into members.
GnnOutput gnn_forward(const GnnParams& params, const Eigen::Ref<const VectorXd>& input, const Eigen::Ref<const MatrixXd>& s,
                      int k, Index target, const std::vector<Index>& members = {});

// Spread a member-indexed vector to length `users` (zeros elsewhere).
VectorXd scatter_members(const Eigen::Ref<const VectorXd>& local, const std::vector<Index>& members, Index users);

// kron(propagation, input): length users * q.
VectorXd embedding_row(const Eigen::Ref<const VectorXd>& input, const Eigen::Ref<const VectorXd>& propagation);

// Full-population embedding row for the target of (S, k, members).
VectorXd target_embedding_row(const GnnParams& params, const Eigen::Ref<const VectorXd>& input,
                              const Eigen::Ref<const MatrixXd>& s, int k, Index target,
                              const std::vector<Index>& members = {});

double gnn_score(const GnnParams& params, const Eigen::Ref<const VectorXd>& embedding);

struct GnnTargetGradient {
  double value = 0.0;
  VectorXd raw;  // d(target output)/d(params), GnnParams::flatten order
};

GnnTargetGradient gnn_target_gradient(const GnnParams& params, const Eigen::Ref<const VectorXd>& embedding);

PooledGradient gnn_gradient(const GnnParams& params, const Eigen::Ref<const VectorXd>& input,
                            const Eigen::Ref<const MatrixXd>& s, int k, Index target, Index pool_size,
                            const std::vector<Index>& members = {});

struct GnnLossGradient {
  double loss = 0.0;
  VectorXd grad;
};

// Quadratic loss over embedding rows (one sample per row).
GnnLossGradient gnn_loss_gradient(const GnnParams& params, const Eigen::Ref<const MatrixXd>& embeddings,
                                  const Eigen::Ref<const VectorXd>& labels, LossReduction reduction = LossReduction::sum);

VectorXd gnn_predict_batch(const GnnParams& params, const Eigen::Ref<const MatrixXd>& embeddings);

GnnParams gnn_gd_step(const GnnParams& params, const Eigen::Ref<const VectorXd>& grad, double eta);

struct GnnTrainReport {
  bool trained = false;
  std::string warning;
  double loss_before = 0.0;
  double loss_after = 0.0;
};

GnnParams train_gnn(GnnParams params, const Eigen::Ref<const MatrixXd>& embeddings, const Eigen::Ref<const VectorXd>& labels,
                    double eta, int steps, LossReduction reduction = LossReduction::sum, GnnTrainReport* report = nullptr);

// Growable row store for embedding rows and their labels.
class GnnDataset {
 public:
  explicit GnnDataset(Index width = 0) : width_(width) {}

  void add(const Eigen::Ref<const VectorXd>& embedding, double label);
  Index size() const { return count_; }
  bool empty() const { return count_ == 0; }
  Index width() const { return width_; }
  Eigen::Ref<const MatrixXd> embeddings() const { return rows_.topRows(count_); }
  Eigen::Ref<const VectorXd> labels() const { return labels_.head(count_); }

 private:
  Index width_ = 0;
  Index count_ = 0;
  MatrixXd rows_;
  VectorXd labels_;
};

}  // namespace gnb
