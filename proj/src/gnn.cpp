#include "gnb/gnn.hpp"

#include <algorithm>
#include <cmath>

namespace gnb {

namespace {

using Dense = Eigen::MatrixXd;

void check_members(const GnnParams& p, const std::vector<Index>& members) {
  for (Index id : members)
    if (id < 0 || id >= p.users) throw shape_error("gnn: member id out of range");
}

// Column-per-sample activations of the target-output MLP.
struct BatchForward {
  Dense z0;                 // m x N, theta_agg^T e
  std::vector<Dense> post;  // inputs of each head layer
  std::vector<Dense> pre;   // outputs of each head layer
  VectorXd out;
};

BatchForward forward_batch(const GnnParams& p, const Eigen::Ref<const MatrixXd>& e) {
  if (e.cols() != p.agg.rows()) throw shape_error("gnn: embedding width does not match theta_agg");
  BatchForward f;
  f.z0 = (e * p.agg).transpose();
  f.post.push_back(f.z0.cwiseMax(0.0));
  const std::size_t depth = p.head.depth();
  f.pre.resize(depth);
  for (std::size_t l = 0; l < depth; ++l) {
    f.pre[l] = p.head.layer(l) * f.post.back();
    if (l + 1 < depth) f.post.push_back(f.pre[l].cwiseMax(0.0));
  }
  f.out = f.pre.back().row(0).transpose();
  if (!f.out.array().isFinite().all()) throw numeric_error("gnn: non-finite output");
  return f;
}

// sum_i upstream_i * d out_i / d params, flattened.
VectorXd backward_batch(const GnnParams& p, const Eigen::Ref<const MatrixXd>& e, const BatchForward& f,
                        const Eigen::Ref<const VectorXd>& upstream) {
  VectorXd flat(p.total_len());
  const std::size_t depth = p.head.depth();
  std::vector<Index> offsets(depth);
  Index offset = p.agg.size();
  for (std::size_t l = 0; l < depth; ++l) {
    offsets[l] = offset;
    offset += p.head.layer(l).size();
  }

  Dense delta = upstream.transpose();
  for (std::size_t l = depth; l-- > 0;) {
    const MatrixXd g = delta * f.post[l].transpose();
    flat.segment(offsets[l], g.size()) = Eigen::Map<const VectorXd>(g.data(), g.size());
    delta = p.head.layer(l).transpose() * delta;
    const Dense& gate = l > 0 ? f.pre[l - 1] : f.z0;
    delta = delta.cwiseProduct((gate.array() > 0.0).cast<double>().matrix());
  }
  const MatrixXd g_agg = e.transpose() * delta.transpose();
  flat.head(g_agg.size()) = Eigen::Map<const VectorXd>(g_agg.data(), g_agg.size());
  return flat;
}

}  // namespace

VectorXd GnnParams::flatten() const {
  VectorXd flat(total_len());
  flat.head(agg.size()) = Eigen::Map<const VectorXd>(agg.data(), agg.size());
  flat.tail(head.total_len()) = head.flatten();
  return flat;
}

GnnParams GnnParams::unflatten(Index users, Index input_dim, Index width, int depth, const Eigen::Ref<const VectorXd>& flat) {
  GnnParams p;
  p.users = users;
  p.input_dim = input_dim;
  p.width = width;
  p.agg.resize(users * input_dim, width);
  const auto dims = gnn_head_dims(width, depth);
  Index head_len = 0;
  for (const auto& d : dims) head_len += d.in * d.out;
  if (flat.size() != p.agg.size() + head_len) throw shape_error("GnnParams::unflatten: length mismatch");
  Eigen::Map<VectorXd>(p.agg.data(), p.agg.size()) = flat.head(p.agg.size());
  p.head = FcParamsD::unflatten(dims, flat.tail(head_len));
  return p;
}

std::vector<LayerDim> gnn_head_dims(Index width, int depth) {
  if (depth < 1) throw shape_error("gnn: depth must be >= 1");
  std::vector<LayerDim> dims(static_cast<std::size_t>(depth - 1), LayerDim{width, width});
  dims.push_back({width, 1});
  return dims;
}

GnnParams init_gnn_params(Index users, Index input_dim, Index width, int depth, std::mt19937_64& rng) {
  if (users < 1 || input_dim < 1 || width < 1) throw shape_error("gnn: zero dimension");
  GnnParams p;
  p.users = users;
  p.input_dim = input_dim;
  p.width = width;
  p.agg.resize(users * input_dim, width);
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(width)));
  for (Index i = 0; i < p.agg.size(); ++i) p.agg.data()[i] = normal(rng);
  p.head = init_params<double>(gnn_head_dims(width, depth), rng);
  return p;
}

GnnParams init_gnn_params(Index users, Index input_dim, Index width, int depth, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return init_gnn_params(users, input_dim, width, depth, rng);
}

MatrixXd build_embedding_matrix(const Eigen::Ref<const VectorXd>& input, Index n) {
  const Index q = input.size();
  if (q < 1) throw shape_error("build_embedding_matrix: empty input");
  if (n < 1) throw shape_error("build_embedding_matrix: no users");
  MatrixXd x = MatrixXd::Zero(n, n * q);
  for (Index u = 0; u < n; ++u) x.block(u, u * q, 1, q) = input.transpose();
  return x;
}

GnnOutput gnn_forward(const GnnParams& params, const Eigen::Ref<const VectorXd>& input, const Eigen::Ref<const MatrixXd>& s,
                      int k, Index target, const std::vector<Index>& members_in) {
  if (k < 1) throw validation_error("gnn_forward: k must be >= 1");
  const auto members = members_in.empty() ? all_users(params.users) : members_in;
  check_members(params, members);
  const auto n = static_cast<Index>(members.size());
  const Index q = params.input_dim;
  if (input.size() != q) throw shape_error("gnn_forward: input dimension mismatch");
  if (s.rows() != n || s.cols() != n) throw shape_error("gnn_forward: S must be |members| x |members|");
  if (target < 0 || target >= n) throw shape_error("gnn_forward: target out of range");

  MatrixXd gathered(n * q, params.width);
  for (Index v = 0; v < n; ++v) gathered.middleRows(v * q, q) = params.agg.middleRows(members[static_cast<std::size_t>(v)] * q, q);
  const MatrixXd xt = build_embedding_matrix(input, n) * gathered;

  GnnOutput out;
  out.target = target;
  out.propagated = matrix_power(s, k) * xt;
  out.hidden.push_back(out.propagated.cwiseMax(0.0));
  const std::size_t depth = params.head.depth();
  for (std::size_t l = 0; l + 1 < depth; ++l)
    out.hidden.push_back((out.hidden.back() * params.head.layer(l).transpose()).cwiseMax(0.0));
  out.per_user = (out.hidden.back() * params.head.layer(depth - 1).transpose()).col(0);
  if (!out.per_user.array().isFinite().all()) throw numeric_error("gnn_forward: non-finite output");
  out.target_value = out.per_user(target);
  return out;
}

VectorXd scatter_members(const Eigen::Ref<const VectorXd>& local, const std::vector<Index>& members, Index users) {
  if (members.empty()) {
    if (local.size() != users) throw shape_error("scatter_members: length mismatch");
    return local;
  }
  if (local.size() != static_cast<Index>(members.size())) throw shape_error("scatter_members: length mismatch");
  VectorXd full = VectorXd::Zero(users);
  for (std::size_t v = 0; v < members.size(); ++v) full(members[v]) = local(static_cast<Index>(v));
  return full;
}

VectorXd embedding_row(const Eigen::Ref<const VectorXd>& input, const Eigen::Ref<const VectorXd>& propagation) {
  const Index q = input.size();
  VectorXd e(propagation.size() * q);
  for (Index v = 0; v < propagation.size(); ++v) e.segment(v * q, q) = propagation(v) * input;
  return e;
}

VectorXd target_embedding_row(const GnnParams& params, const Eigen::Ref<const VectorXd>& input,
                              const Eigen::Ref<const MatrixXd>& s, int k, Index target,
                              const std::vector<Index>& members) {
  if (input.size() != params.input_dim) throw shape_error("gnn: input dimension mismatch");
  check_members(params, members);
  const VectorXd local = propagation_row(s, k, target);
  return embedding_row(input, scatter_members(local, members, params.users));
}

double gnn_score(const GnnParams& params, const Eigen::Ref<const VectorXd>& embedding) {
  const MatrixXd e = embedding.transpose();
  return forward_batch(params, e).out(0);
}

GnnTargetGradient gnn_target_gradient(const GnnParams& params, const Eigen::Ref<const VectorXd>& embedding) {
  const MatrixXd e = embedding.transpose();
  const auto f = forward_batch(params, e);
  return {f.out(0), backward_batch(params, e, f, VectorXd::Ones(1))};
}

PooledGradient gnn_gradient(const GnnParams& params, const Eigen::Ref<const VectorXd>& input,
                            const Eigen::Ref<const MatrixXd>& s, int k, Index target, Index pool_size,
                            const std::vector<Index>& members) {
  const VectorXd e = target_embedding_row(params, input, s, k, target, members);
  return pool_and_normalize(gnn_target_gradient(params, e).raw, pool_size);
}

VectorXd gnn_predict_batch(const GnnParams& params, const Eigen::Ref<const MatrixXd>& embeddings) {
  return forward_batch(params, embeddings).out;
}

GnnLossGradient gnn_loss_gradient(const GnnParams& params, const Eigen::Ref<const MatrixXd>& embeddings,
                                  const Eigen::Ref<const VectorXd>& labels, LossReduction reduction) {
  if (embeddings.rows() != labels.size()) throw shape_error("gnn_loss_gradient: sample/label count mismatch");
  const auto f = forward_batch(params, embeddings);
  const VectorXd residual = f.out - labels;
  const double scale = reduction == LossReduction::mean && labels.size() > 0 ? 1.0 / static_cast<double>(labels.size()) : 1.0;
  return {residual.squaredNorm() * scale, backward_batch(params, embeddings, f, 2.0 * scale * residual)};
}

GnnParams gnn_gd_step(const GnnParams& params, const Eigen::Ref<const VectorXd>& grad, double eta) {
  if (grad.size() != params.total_len()) throw shape_error("gnn_gd_step: gradient length mismatch");
  if (!(eta > 0.0) || !std::isfinite(eta)) throw validation_error("gnn_gd_step: learning rate must be positive and finite");
  if (!grad.array().isFinite().all()) throw numeric_error("gnn_gd_step: non-finite gradient entries");
  GnnParams next = params;
  next.agg -= eta * Eigen::Map<const MatrixXd>(grad.data(), params.agg.rows(), params.agg.cols());
  Index offset = params.agg.size();
  for (std::size_t l = 0; l < params.head.depth(); ++l) {
    auto& w = next.head.layer(l);
    w -= eta * Eigen::Map<const MatrixXd>(grad.data() + offset, w.rows(), w.cols());
    offset += w.size();
  }
  if (!next.agg.array().isFinite().all()) throw numeric_error("gnn_gd_step: update produced non-finite parameters");
  return next;
}

GnnParams train_gnn(GnnParams params, const Eigen::Ref<const MatrixXd>& embeddings, const Eigen::Ref<const VectorXd>& labels,
                    double eta, int steps, LossReduction reduction, GnnTrainReport* report) {
  GnnTrainReport local;
  GnnTrainReport& rep = report ? *report : local;
  if (embeddings.rows() == 0) {
    rep.warning = "gnn: empty dataset, nothing to train";
    return params;
  }
  rep.loss_before = gnn_loss_gradient(params, embeddings, labels, reduction).loss;
  for (int j = 0; j < steps; ++j) {
    const auto lg = gnn_loss_gradient(params, embeddings, labels, reduction);
    params = gnn_gd_step(params, lg.grad, eta);
  }
  rep.loss_after = gnn_loss_gradient(params, embeddings, labels, reduction).loss;
  rep.trained = true;
  return params;
}

void GnnDataset::add(const Eigen::Ref<const VectorXd>& embedding, double label) {
  if (width_ == 0) width_ = embedding.size();
  if (embedding.size() != width_) throw shape_error("GnnDataset: embedding width mismatch");
  if (count_ == rows_.rows()) {
    const Index cap = std::max<Index>(16, 2 * count_);
    rows_.conservativeResize(cap, width_);
    labels_.conservativeResize(cap);
  }
  rows_.row(count_) = embedding.transpose();
  labels_(count_) = label;
  ++count_;
}

}  // namespace gnb
