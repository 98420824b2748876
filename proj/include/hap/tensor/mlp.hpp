#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "hap/core/error.hpp"
#include "hap/core/rng.hpp"

namespace hap::tensor {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Sparse input column. Symbolic grid observations are mostly zeros, so the
/// first layer is evaluated from the non-zero entries only.
struct SparseVec {
  std::vector<std::uint32_t> index;
  std::vector<double> value;

  void push(std::uint32_t i, double v) {
    if (v == 0.0) return;
    index.push_back(i);
    value.push_back(v);
  }

  [[nodiscard]] std::vector<double> dense(std::size_t n) const {
    std::vector<double> out(n, 0.0);
    for (std::size_t k = 0; k < index.size(); ++k) out[index[k]] += value[k];
    return out;
  }

  friend bool operator==(const SparseVec&, const SparseVec&) = default;
};

enum class Activation { kRelu };

/// Fully connected network: ReLU on hidden layers, linear output layer.
///
/// All parameters live in one flat vector (per layer: weights column-major
/// out x in, then bias) so optimisers, checkpoints and finite-difference
/// checks can treat the network as a single array.
class Mlp {
 public:
  Mlp() = default;

  /// Zero-initialised network.
  explicit Mlp(std::vector<std::size_t> layer_sizes) : sizes_(std::move(layer_sizes)) {
    require(sizes_.size() >= 2, "mlp: need at least input and output sizes");
    for (auto s : sizes_) require(s > 0, "mlp: layer sizes must be positive");
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      offsets_.push_back(offset);
      offset += sizes_[l + 1] * sizes_[l] + sizes_[l + 1];
    }
    params_ = Vector::Zero(static_cast<Eigen::Index>(offset));
  }

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases; the output
  /// layer is additionally multiplied by `output_scale`.
  static Mlp random(std::vector<std::size_t> layer_sizes, RngStream& rng, double output_scale = 1.0) {
    Mlp net(std::move(layer_sizes));
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(net.sizes_[l]));
      const double scale = (l + 1 == net.layer_count()) ? output_scale : 1.0;
      auto w = net.weight(l);
      for (Eigen::Index j = 0; j < w.cols(); ++j)
        for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = scale * rng.uniform(-bound, bound);
      auto b = net.bias(l);
      for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = scale * rng.uniform(-bound, bound);
    }
    return net;
  }

  [[nodiscard]] const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  [[nodiscard]] std::size_t layer_count() const { return offsets_.size(); }
  [[nodiscard]] std::size_t input_size() const { return sizes_.front(); }
  [[nodiscard]] std::size_t output_size() const { return sizes_.back(); }
  [[nodiscard]] std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }
  [[nodiscard]] Activation activation() const { return Activation::kRelu; }

  [[nodiscard]] Vector& parameters() { return params_; }
  [[nodiscard]] const Vector& parameters() const { return params_; }

  Eigen::Map<Matrix> weight(std::size_t l) {
    return {params_.data() + offsets_[l], rows(l), cols(l)};
  }
  [[nodiscard]] Eigen::Map<const Matrix> weight(std::size_t l) const {
    return {params_.data() + offsets_[l], rows(l), cols(l)};
  }
  Eigen::Map<Vector> bias(std::size_t l) { return {params_.data() + offsets_[l] + rows(l) * cols(l), rows(l)}; }
  [[nodiscard]] Eigen::Map<const Vector> bias(std::size_t l) const {
    return {params_.data() + offsets_[l] + rows(l) * cols(l), rows(l)};
  }

  /// Offset of layer l inside the flat parameter vector.
  [[nodiscard]] std::size_t offset(std::size_t l) const { return offsets_[l]; }

  [[nodiscard]] bool all_finite() const { return params_.allFinite(); }

  friend bool operator==(const Mlp& a, const Mlp& b) { return a.sizes_ == b.sizes_ && a.params_ == b.params_; }

 private:
  [[nodiscard]] Eigen::Index rows(std::size_t l) const { return static_cast<Eigen::Index>(sizes_[l + 1]); }
  [[nodiscard]] Eigen::Index cols(std::size_t l) const { return static_cast<Eigen::Index>(sizes_[l]); }

  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
  Vector params_;
};

/// Activations recorded by a forward pass, consumed by backward.
struct MlpCache {
  Matrix dense_input;
  std::vector<SparseVec> sparse_input;
  bool sparse = false;
  /// hidden[l] is the post-ReLU output of layer l (input of layer l+1).
  std::vector<Matrix> hidden;
  Eigen::Index batch = 0;

  [[nodiscard]] bool valid() const { return batch > 0; }
  void clear() { *this = MlpCache{}; }
};

namespace detail {

inline Matrix forward_tail(const Mlp& net, Matrix z, MlpCache* cache) {
  for (std::size_t l = 0;; ++l) {
    if (l + 1 == net.layer_count()) return z;
    z = z.cwiseMax(0.0);
    Matrix next = net.weight(l + 1) * z;
    next.colwise() += net.bias(l + 1);
    if (cache) cache->hidden.push_back(std::move(z));
    z = std::move(next);
  }
}

}  // namespace detail

/// Batched forward pass; `inputs` is input_size x batch.
inline Matrix forward(const Mlp& net, const Matrix& inputs, MlpCache* cache = nullptr) {
  require(net.layer_count() > 0, "mlp forward: empty network");
  require(static_cast<std::size_t>(inputs.rows()) == net.input_size(),
          "mlp forward: input has " + std::to_string(inputs.rows()) + " rows, expected " +
              std::to_string(net.input_size()));
  require(inputs.cols() > 0, "mlp forward: empty batch");
  Matrix z = net.weight(0) * inputs;
  z.colwise() += net.bias(0);
  if (cache) {
    cache->clear();
    cache->dense_input = inputs;
    cache->batch = inputs.cols();
  }
  return detail::forward_tail(net, std::move(z), cache);
}

inline Matrix forward(const Mlp& net, std::span<const SparseVec> inputs, MlpCache* cache = nullptr) {
  require(net.layer_count() > 0, "mlp forward: empty network");
  require(!inputs.empty(), "mlp forward: empty batch");
  const auto w0 = net.weight(0);
  Matrix z(w0.rows(), static_cast<Eigen::Index>(inputs.size()));
  for (std::size_t b = 0; b < inputs.size(); ++b) {
    auto col = z.col(static_cast<Eigen::Index>(b));
    col = net.bias(0);
    const auto& x = inputs[b];
    for (std::size_t k = 0; k < x.index.size(); ++k) {
      require(x.index[k] < net.input_size(), "mlp forward: sparse index out of range");
      col.noalias() += w0.col(x.index[k]) * x.value[k];
    }
  }
  if (cache) {
    cache->clear();
    cache->sparse = true;
    cache->sparse_input.assign(inputs.begin(), inputs.end());
    cache->batch = static_cast<Eigen::Index>(inputs.size());
  }
  return detail::forward_tail(net, std::move(z), cache);
}

inline std::vector<double> forward(const Mlp& net, std::span<const double> input) {
  require(input.size() == net.input_size(), "mlp forward: input length " + std::to_string(input.size()) +
                                                " does not match first layer size " +
                                                std::to_string(net.input_size()));
  Matrix x = Eigen::Map<const Vector>(input.data(), static_cast<Eigen::Index>(input.size()));
  Matrix y = forward(net, x);
  return {y.data(), y.data() + y.size()};
}

/// Reverse pass. Accumulates dL/dparams into `grads` (+=) and optionally
/// writes dL/dinput (input_size x batch; dense inputs only) and the gradient
/// w.r.t. the first layer's pre-activations (sizes[1] x batch).
inline void backward(const Mlp& net, const MlpCache& cache, const Matrix& output_grad, Vector& grads,
                     Matrix* input_grad = nullptr, Matrix* first_layer_delta = nullptr) {
  require(cache.valid(), "mlp backward: no cached forward pass");
  require(cache.hidden.size() + 1 == net.layer_count(), "mlp backward: cache does not match network");
  require(output_grad.rows() == static_cast<Eigen::Index>(net.output_size()) && output_grad.cols() == cache.batch,
          "mlp backward: output gradient shape mismatch");
  if (grads.size() == 0) grads = Vector::Zero(static_cast<Eigen::Index>(net.parameter_count()));
  require(static_cast<std::size_t>(grads.size()) == net.parameter_count(), "mlp backward: gradient size mismatch");

  Matrix delta = output_grad;
  for (std::size_t l = net.layer_count(); l-- > 0;) {
    const auto rows = static_cast<Eigen::Index>(net.layer_sizes()[l + 1]);
    const auto cols = static_cast<Eigen::Index>(net.layer_sizes()[l]);
    Eigen::Map<Matrix> gw(grads.data() + net.offset(l), rows, cols);
    Eigen::Map<Vector> gb(grads.data() + net.offset(l) + rows * cols, rows);
    gb.noalias() += delta.rowwise().sum();
    if (l == 0 && first_layer_delta) *first_layer_delta = delta;
    if (l > 0) {
      const Matrix& a = cache.hidden[l - 1];
      gw.noalias() += delta * a.transpose();
      Matrix back = net.weight(l).transpose() * delta;
      delta = (a.array() > 0.0).select(back, 0.0);
    } else if (cache.sparse) {
      for (std::size_t b = 0; b < cache.sparse_input.size(); ++b) {
        const auto& x = cache.sparse_input[b];
        for (std::size_t k = 0; k < x.index.size(); ++k)
          gw.col(x.index[k]).noalias() += delta.col(static_cast<Eigen::Index>(b)) * x.value[k];
      }
      require(input_grad == nullptr, "mlp backward: input gradient unavailable for sparse inputs");
    } else {
      gw.noalias() += delta * cache.dense_input.transpose();
      if (input_grad) *input_grad = net.weight(0).transpose() * delta;
    }
  }
}

/// Parameter gradient of <output_grad, net(input)> for a single input.
inline Vector gradients(const Mlp& net, std::span<const double> input, std::span<const double> output_grad) {
  require(input.size() == net.input_size(), "mlp gradients: input size mismatch");
  require(output_grad.size() == net.output_size(), "mlp gradients: output gradient size mismatch");
  MlpCache cache;
  Matrix x = Eigen::Map<const Vector>(input.data(), static_cast<Eigen::Index>(input.size()));
  forward(net, x, &cache);
  Matrix g = Eigen::Map<const Vector>(output_grad.data(), static_cast<Eigen::Index>(output_grad.size()));
  Vector grads = Vector::Zero(static_cast<Eigen::Index>(net.parameter_count()));
  backward(net, cache, g, grads);
  return grads;
}

/// Scales `grads` in place so its L2 norm is at most max_norm (no-op when
/// max_norm <= 0). Returns the norm before clipping.
inline double clip_grad_norm(Vector& grads, double max_norm) {
  const double norm = grads.norm();
  if (max_norm > 0.0 && norm > max_norm) grads *= max_norm / norm;
  return norm;
}

}  // namespace hap::tensor
