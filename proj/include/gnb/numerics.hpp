#pragma once

// Dense kernel shared by every model: bias-free L-layer ReLU networks,
// their forward/backward passes and plain gradient-descent updates.
//
// Layer l is stored as an (out x in) row-major matrix, so a network computes
//   f(x) = W_L relu(W_{L-1} ... relu(W_1 x)).
// Flattening concatenates the row-major storage of W_1 .. W_L.

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "gnb/errors.hpp"

namespace gnb {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;

struct LayerDim {
  Index in = 0;
  Index out = 0;
  friend bool operator==(const LayerDim&, const LayerDim&) = default;
};

// [(input, width), (width, width) x (depth - 2), (width, 1)]
inline std::vector<LayerDim> mlp_dims(Index input, Index width, int depth) {
  if (depth < 1) throw shape_error("mlp_dims: depth must be >= 1");
  std::vector<LayerDim> dims;
  if (depth == 1) {
    dims.push_back({input, 1});
    return dims;
  }
  dims.push_back({input, width});
  for (int l = 1; l < depth - 1; ++l) dims.push_back({width, width});
  dims.push_back({width, 1});
  return dims;
}

inline void validate_dims(const std::vector<LayerDim>& dims) {
  if (dims.empty()) throw shape_error("layer_dims must be non-empty");
  for (std::size_t l = 0; l < dims.size(); ++l) {
    if (dims[l].in <= 0 || dims[l].out <= 0)
      throw shape_error("layer " + std::to_string(l) + " has a zero dimension");
    if (l > 0 && dims[l - 1].out != dims[l].in)
      throw shape_error("layer " + std::to_string(l) + " input does not chain with previous output");
  }
}

template <typename Scalar>
class FcParams {
 public:
  using MatrixType = Matrix<Scalar>;
  using VectorType = Vector<Scalar>;

  FcParams() = default;

  explicit FcParams(std::vector<LayerDim> dims) : dims_(std::move(dims)) {
    validate_dims(dims_);
    layers_.reserve(dims_.size());
    for (const auto& d : dims_) {
      layers_.push_back(MatrixType::Zero(d.out, d.in));
      total_len_ += d.in * d.out;
    }
  }

  const std::vector<LayerDim>& dims() const { return dims_; }
  std::size_t depth() const { return layers_.size(); }
  Index input_dim() const { return dims_.empty() ? 0 : dims_.front().in; }
  Index output_dim() const { return dims_.empty() ? 0 : dims_.back().out; }
  Index total_len() const { return total_len_; }

  const MatrixType& layer(std::size_t l) const { return layers_.at(l); }
  MatrixType& layer(std::size_t l) { return layers_.at(l); }

  VectorType flatten() const {
    VectorType flat(total_len_);
    Index offset = 0;
    for (const auto& w : layers_) {
      flat.segment(offset, w.size()) = Eigen::Map<const VectorType>(w.data(), w.size());
      offset += w.size();
    }
    return flat;
  }

  static FcParams unflatten(std::vector<LayerDim> dims, const Eigen::Ref<const VectorType>& flat) {
    FcParams p(std::move(dims));
    if (flat.size() != p.total_len_) throw shape_error("unflatten: flat length does not match layer dims");
    Index offset = 0;
    for (auto& w : p.layers_) {
      Eigen::Map<VectorType>(w.data(), w.size()) = flat.segment(offset, w.size());
      offset += w.size();
    }
    return p;
  }

  friend bool operator==(const FcParams& a, const FcParams& b) {
    if (a.dims_ != b.dims_) return false;
    for (std::size_t l = 0; l < a.layers_.size(); ++l)
      if (a.layers_[l] != b.layers_[l]) return false;
    return true;
  }

 private:
  std::vector<LayerDim> dims_;
  std::vector<MatrixType> layers_;
  Index total_len_ = 0;
};

// d(output)/d(params) or d(loss)/d(params), flattened in FcParams order.
template <typename Scalar>
struct Gradient {
  std::vector<LayerDim> dims;
  Vector<Scalar> values;
};

template <typename Scalar>
struct FcCache {
  std::vector<LayerDim> dims;
  Vector<Scalar> input;
  std::vector<Vector<Scalar>> pre_activations;  // z_1 .. z_L, z_L is the output
};

template <typename Scalar>
struct FcForward {
  Scalar output{};
  FcCache<Scalar> cache;
};

template <typename Scalar>
struct FcBackward {
  Gradient<Scalar> params;
  Vector<Scalar> input;  // d(output)/d(input)
};

namespace detail {
inline std::atomic<std::uint64_t> forward_passes{0};
}  // namespace detail

// Number of fc_forward calls made by this process; used to audit graph-building cost.
inline std::uint64_t forward_pass_count() { return detail::forward_passes.load(std::memory_order_relaxed); }

template <typename Scalar>
FcParams<Scalar> init_params(const std::vector<LayerDim>& dims, std::mt19937_64& rng) {
  FcParams<Scalar> p(dims);
  for (std::size_t l = 0; l < p.depth(); ++l) {
    const bool last = l + 1 == p.depth();
    const double var = (last ? 1.0 : 2.0) / static_cast<double>(dims[l].in);
    std::normal_distribution<double> normal(0.0, std::sqrt(var));
    auto& w = p.layer(l);
    for (Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<Scalar>(normal(rng));
  }
  return p;
}

// Hidden layers ~ N(0, 2/fan_in), last layer ~ N(0, 1/fan_in).
template <typename Scalar>
FcParams<Scalar> init_params(const std::vector<LayerDim>& dims, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return init_params<Scalar>(dims, rng);
}

template <typename Scalar, typename Derived>
FcForward<Scalar> fc_forward(const FcParams<Scalar>& params, const Eigen::MatrixBase<Derived>& x) {
  if (params.depth() == 0) throw shape_error("fc_forward: empty network");
  if (x.size() != params.input_dim())
    throw shape_error("fc_forward: input has length " + std::to_string(x.size()) + ", network expects " +
                      std::to_string(params.input_dim()));
  if (params.output_dim() != 1) throw shape_error("fc_forward: network must have scalar output");
  detail::forward_passes.fetch_add(1, std::memory_order_relaxed);

  FcForward<Scalar> fwd;
  fwd.cache.dims = params.dims();
  fwd.cache.input = x;
  fwd.cache.pre_activations.reserve(params.depth());
  Vector<Scalar> h = fwd.cache.input;
  for (std::size_t l = 0; l < params.depth(); ++l) {
    Vector<Scalar> z = params.layer(l) * h;
    if (l + 1 < params.depth()) h = z.cwiseMax(Scalar(0));
    fwd.cache.pre_activations.push_back(std::move(z));
  }
  fwd.output = fwd.cache.pre_activations.back()(0);
  if (!std::isfinite(static_cast<double>(fwd.output))) throw numeric_error("fc_forward: non-finite output");
  return fwd;
}

template <typename Scalar>
FcBackward<Scalar> fc_backprop(const FcParams<Scalar>& params, const FcCache<Scalar>& cache) {
  if (cache.dims != params.dims() || cache.pre_activations.size() != params.depth() ||
      cache.input.size() != params.input_dim())
    throw shape_error("fc_backward: cache does not match network shape");

  const std::size_t depth = params.depth();
  FcBackward<Scalar> out;
  out.params.dims = params.dims();
  out.params.values.resize(params.total_len());

  std::vector<Index> offsets(depth);
  Index offset = 0;
  for (std::size_t l = 0; l < depth; ++l) {
    offsets[l] = offset;
    offset += params.layer(l).size();
  }

  Vector<Scalar> delta = Vector<Scalar>::Ones(1);
  for (std::size_t l = depth; l-- > 0;) {
    const auto& w = params.layer(l);
    Matrix<Scalar> g;
    if (l == 0) {
      g = delta * cache.input.transpose();
    } else {
      g = delta * cache.pre_activations[l - 1].cwiseMax(Scalar(0)).transpose();
    }
    out.params.values.segment(offsets[l], g.size()) = Eigen::Map<const Vector<Scalar>>(g.data(), g.size());
    Vector<Scalar> back = w.transpose() * delta;
    if (l == 0) {
      out.input = std::move(back);
    } else {
      // ReLU subgradient at 0 is 0.
      delta = back.cwiseProduct((cache.pre_activations[l - 1].array() > Scalar(0)).template cast<Scalar>().matrix());
    }
  }
  return out;
}

template <typename Scalar>
Gradient<Scalar> fc_backward(const FcParams<Scalar>& params, const FcCache<Scalar>& cache) {
  return fc_backprop(params, cache).params;
}

enum class LossReduction { sum, mean };

template <typename Scalar>
struct LossGradient {
  Scalar loss{};
  Gradient<Scalar> grad;
};

// Batched predictions; `inputs` holds one sample per row.
template <typename Scalar>
Vector<Scalar> fc_predict_batch(const FcParams<Scalar>& params, const Eigen::Ref<const Matrix<Scalar>>& inputs) {
  if (inputs.cols() != params.input_dim()) throw shape_error("fc_predict_batch: input width mismatch");
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> h = inputs.transpose();
  for (std::size_t l = 0; l < params.depth(); ++l) {
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> z = params.layer(l) * h;
    h = (l + 1 < params.depth()) ? Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>(z.cwiseMax(Scalar(0))) : z;
  }
  return h.transpose().col(0);
}

// Quadratic loss sum_i (f(x_i) - y_i)^2 (or its mean) and its parameter gradient.
template <typename Scalar>
LossGradient<Scalar> fc_loss_gradient(const FcParams<Scalar>& params, const Eigen::Ref<const Matrix<Scalar>>& inputs,
                                      const Eigen::Ref<const Vector<Scalar>>& labels,
                                      LossReduction reduction = LossReduction::sum) {
  using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (inputs.cols() != params.input_dim()) throw shape_error("fc_loss_gradient: input width mismatch");
  if (inputs.rows() != labels.size()) throw shape_error("fc_loss_gradient: sample/label count mismatch");
  const std::size_t depth = params.depth();

  // Column-per-sample activations.
  std::vector<Dense> pre(depth);
  Dense h = inputs.transpose();
  std::vector<Dense> post;
  post.reserve(depth);
  post.push_back(h);
  for (std::size_t l = 0; l < depth; ++l) {
    pre[l] = params.layer(l) * post.back();
    if (l + 1 < depth) post.push_back(pre[l].cwiseMax(Scalar(0)));
  }
  Vector<Scalar> residual = pre.back().row(0).transpose() - labels;
  const Scalar scale = reduction == LossReduction::mean && labels.size() > 0
                           ? Scalar(1) / static_cast<Scalar>(labels.size())
                           : Scalar(1);

  LossGradient<Scalar> out;
  out.loss = residual.squaredNorm() * scale;
  out.grad.dims = params.dims();
  out.grad.values.resize(params.total_len());

  Index offset = params.total_len();
  Dense delta = (Scalar(2) * scale) * residual.transpose();  // 1 x N
  for (std::size_t l = depth; l-- > 0;) {
    Matrix<Scalar> g = delta * post[l].transpose();
    offset -= g.size();
    out.grad.values.segment(offset, g.size()) = Eigen::Map<const Vector<Scalar>>(g.data(), g.size());
    if (l > 0) {
      delta = (params.layer(l).transpose() * delta).cwiseProduct((pre[l - 1].array() > Scalar(0)).template cast<Scalar>().matrix());
    }
  }
  return out;
}

template <typename Scalar>
FcParams<Scalar> gd_step(const FcParams<Scalar>& params, const Gradient<Scalar>& grad, Scalar eta) {
  if (grad.dims != params.dims() || grad.values.size() != params.total_len())
    throw shape_error("gd_step: gradient shape does not match parameters");
  if (!(eta > Scalar(0)) || !std::isfinite(static_cast<double>(eta)))
    throw validation_error("gd_step: learning rate must be positive and finite");
  if (!grad.values.array().isFinite().all()) throw numeric_error("gd_step: non-finite gradient entries");
  Vector<Scalar> flat = params.flatten() - eta * grad.values;
  if (!flat.array().isFinite().all()) throw numeric_error("gd_step: update produced non-finite parameters");
  return FcParams<Scalar>::unflatten(params.dims(), flat);
}

}  // namespace gnb
