#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "rng.hpp"

namespace supwma::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using IndexMatrix = Eigen::Matrix<std::uint32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// y = x W + b with W stored in x out.
struct DenseLayer {
  Matrix weights;
  RowVector bias;

  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out) : weights(Matrix::Zero(in, out)), bias(RowVector::Zero(out)) {}

  std::size_t in_dim() const noexcept { return static_cast<std::size_t>(weights.rows()); }
  std::size_t out_dim() const noexcept { return static_cast<std::size_t>(weights.cols()); }
  std::size_t parameter_count() const noexcept { return in_dim() * out_dim() + out_dim(); }
};

struct DenseGrads {
  Matrix input;  // empty when not requested
  Matrix weights;
  RowVector bias;
};

Matrix dense_forward(const DenseLayer& layer, const Matrix& input);
DenseGrads dense_backward(const DenseLayer& layer, const Matrix& input, const Matrix& grad_out,
                          bool want_input_grad = true);

Matrix relu_forward(const Matrix& x);
void relu_inplace(Matrix& x);
/// Gradient passes where the forward input was strictly positive; zero at 0.
Matrix relu_backward(const Matrix& forward_input, const Matrix& grad_out);

/// Column-wise max over consecutive groups of `group` rows: (M*group) x d -> M x d.
/// Ties resolve to the lowest row within the group; argmax holds that
/// in-group index.
struct MaxPool {
  Matrix pooled;
  IndexMatrix argmax;
};

MaxPool maxpool_points(const Matrix& features, std::size_t group);
Matrix maxpool_backward(const IndexMatrix& argmax, const Matrix& grad_pooled, std::size_t group);

inline constexpr double kNormEpsilon = 1e-12;

struct L2Normalized {
  Matrix output;
  Eigen::VectorXd norms;
};

/// Row-wise x / ||x||. Throws kNumerical for rows with norm <= kNormEpsilon.
L2Normalized l2_normalize_forward(const Matrix& x);
Matrix l2_normalize_backward(const L2Normalized& forward, const Matrix& grad_out);

struct LossGrad {
  double loss = 0.0;
  Matrix grad;
};

/// Mean over rows of -log softmax(logits)[label]; grad = (softmax - onehot) / M.
LossGrad softmax_cross_entropy(const Matrix& logits, std::span<const std::int32_t> labels);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;
  AdamConfig config;

  AdamState() = default;
  explicit AdamState(std::size_t size, AdamConfig cfg = {}) : m(size, 0.0), v(size, 0.0), config(cfg) {}
};

/// One bias-corrected Adam update, no weight decay. Throws before touching
/// any state if a gradient is non-finite.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr);

/// Uniform in +-sqrt(6 / (fan_in + fan_out)).
Matrix glorot_uniform(std::size_t fan_in, std::size_t fan_out, SeededRng& rng);

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central differences of `f` at `x` compared with `analytic`:
/// max_i |a_i - n_i| / max(max_i |a_i|, max_i |n_i|, 1e-10).
double finite_difference_check(const ScalarFunction& f, std::span<const double> x,
                               std::span<const double> analytic, double h = 1e-6);

inline std::span<double> flat(Matrix& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
inline std::span<const double> flat(const Matrix& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}
inline std::span<double> flat(RowVector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }
inline std::span<const double> flat(const RowVector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace supwma::nn
