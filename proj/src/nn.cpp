#include "nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "error.hpp"

namespace supwma::nn {

namespace {

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

Matrix dense_forward(const DenseLayer& layer, const Matrix& input) {
  require(input.cols() == layer.weights.rows(), ErrorCode::kInvalidArgument,
          "dense: input " + shape(input) + " vs weights " + shape(layer.weights));
  Matrix out(input.rows(), layer.weights.cols());
  out.noalias() = input * layer.weights;
  out.rowwise() += layer.bias;
  return out;
}

DenseGrads dense_backward(const DenseLayer& layer, const Matrix& input, const Matrix& grad_out,
                          bool want_input_grad) {
  require(input.cols() == layer.weights.rows() && grad_out.cols() == layer.weights.cols() &&
              grad_out.rows() == input.rows(),
          ErrorCode::kInvalidArgument,
          "dense backward: input " + shape(input) + ", grad " + shape(grad_out) + ", weights " +
              shape(layer.weights));
  DenseGrads g;
  g.weights.resize(layer.weights.rows(), layer.weights.cols());
  g.weights.noalias() = input.transpose() * grad_out;
  g.bias = grad_out.colwise().sum();
  if (want_input_grad) {
    g.input.resize(input.rows(), input.cols());
    g.input.noalias() = grad_out * layer.weights.transpose();
  }
  return g;
}

Matrix relu_forward(const Matrix& x) { return x.cwiseMax(0.0); }

void relu_inplace(Matrix& x) { x = x.cwiseMax(0.0); }

Matrix relu_backward(const Matrix& forward_input, const Matrix& grad_out) {
  require(forward_input.rows() == grad_out.rows() && forward_input.cols() == grad_out.cols(),
          ErrorCode::kInvalidArgument, "relu backward shape mismatch");
  return (forward_input.array() > 0.0).select(grad_out, 0.0);
}

MaxPool maxpool_points(const Matrix& features, std::size_t group) {
  require(group >= 1 && features.rows() > 0, ErrorCode::kInvalidArgument, "maxpool: empty input");
  require(static_cast<std::size_t>(features.rows()) % group == 0, ErrorCode::kInvalidArgument,
          "maxpool: rows not divisible by group size");
  const Eigen::Index groups = features.rows() / static_cast<Eigen::Index>(group);
  const Eigen::Index d = features.cols();
  MaxPool out{Matrix(groups, d), IndexMatrix::Zero(groups, d)};
  for (Eigen::Index m = 0; m < groups; ++m) {
    const Eigen::Index base = m * static_cast<Eigen::Index>(group);
    out.pooled.row(m) = features.row(base);
    double* best = out.pooled.row(m).data();
    std::uint32_t* arg = out.argmax.row(m).data();
    for (std::size_t i = 1; i < group; ++i) {
      const double* row = features.row(base + static_cast<Eigen::Index>(i)).data();
      for (Eigen::Index j = 0; j < d; ++j) {
        if (row[j] > best[j]) {
          best[j] = row[j];
          arg[j] = static_cast<std::uint32_t>(i);
        }
      }
    }
  }
  return out;
}

Matrix maxpool_backward(const IndexMatrix& argmax, const Matrix& grad_pooled, std::size_t group) {
  require(argmax.rows() == grad_pooled.rows() && argmax.cols() == grad_pooled.cols(),
          ErrorCode::kInvalidArgument, "maxpool backward shape mismatch");
  Matrix grad = Matrix::Zero(grad_pooled.rows() * static_cast<Eigen::Index>(group), grad_pooled.cols());
  for (Eigen::Index m = 0; m < grad_pooled.rows(); ++m) {
    for (Eigen::Index j = 0; j < grad_pooled.cols(); ++j) {
      grad(m * static_cast<Eigen::Index>(group) + argmax(m, j), j) = grad_pooled(m, j);
    }
  }
  return grad;
}

L2Normalized l2_normalize_forward(const Matrix& x) {
  L2Normalized out{x, x.rowwise().norm()};
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    require(out.norms(i) > kNormEpsilon && std::isfinite(out.norms(i)), ErrorCode::kNumerical,
            "degenerate contrastive feature (row " + std::to_string(i) + ")");
    out.output.row(i) /= out.norms(i);
  }
  return out;
}

Matrix l2_normalize_backward(const L2Normalized& forward, const Matrix& grad_out) {
  require(grad_out.rows() == forward.output.rows() && grad_out.cols() == forward.output.cols(),
          ErrorCode::kInvalidArgument, "l2 normalize backward shape mismatch");
  // d(x/|x|) = (g - y (y.g)) / |x|
  const Eigen::VectorXd dots = (forward.output.array() * grad_out.array()).rowwise().sum();
  Matrix grad = grad_out - (forward.output.array().colwise() * dots.array()).matrix();
  grad.array().colwise() /= forward.norms.array();
  return grad;
}

LossGrad softmax_cross_entropy(const Matrix& logits, std::span<const std::int32_t> labels) {
  require(static_cast<std::size_t>(logits.rows()) == labels.size(), ErrorCode::kInvalidArgument,
          "cross entropy: label count does not match batch");
  require(logits.rows() > 0, ErrorCode::kInvalidArgument, "cross entropy: empty batch");
  const Eigen::Index k = logits.cols();
  const double inv_m = 1.0 / static_cast<double>(logits.rows());
  LossGrad out{0.0, Matrix(logits.rows(), k)};
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const std::int32_t y = labels[static_cast<std::size_t>(i)];
    require(y >= 0 && y < k, ErrorCode::kInvalidArgument,
            "cross entropy: label out of range: " + std::to_string(y));
    const double mx = logits.row(i).maxCoeff();
    auto e = out.grad.row(i);
    e = (logits.row(i).array() - mx).exp().matrix();
    const double sum = e.sum();
    out.loss += std::log(sum) - (logits(i, y) - mx);
    e /= sum;
    e(y) -= 1.0;
    e *= inv_m;
  }
  out.loss *= inv_m;
  return out;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr) {
  require(params.size() == grads.size() && state.m.size() == params.size() &&
              state.v.size() == params.size(),
          ErrorCode::kInvalidArgument, "adam: shape mismatch");
  for (double g : grads) {
    require(std::isfinite(g), ErrorCode::kNumerical, "adam: non-finite gradient");
  }
  const auto& c = state.config;
  ++state.t;
  const double t = static_cast<double>(state.t);
  // Bias correction folded into the step size; epsilon is added to the
  // uncorrected sqrt(v).
  const double step = lr * std::sqrt(1.0 - std::pow(c.beta2, t)) / (1.0 - std::pow(c.beta1, t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * g;
    state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * g * g;
    params[i] -= step * state.m[i] / (std::sqrt(state.v[i]) + c.epsilon);
  }
}

Matrix glorot_uniform(std::size_t fan_in, std::size_t fan_out, SeededRng& rng) {
  require(fan_in > 0 && fan_out > 0, ErrorCode::kInvalidArgument, "glorot: zero fan");
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix w(fan_in, fan_out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-bound, bound);
  return w;
}

double finite_difference_check(const ScalarFunction& f, std::span<const double> x,
                               std::span<const double> analytic, double h) {
  require(x.size() == analytic.size(), ErrorCode::kInvalidArgument,
          "finite difference: gradient size mismatch");
  std::vector<double> probe(x.begin(), x.end());
  double max_diff = 0.0;
  double scale = 1e-10;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = f(probe);
    probe[i] = orig - h;
    const double down = f(probe);
    probe[i] = orig;
    const double numeric = (up - down) / (2.0 * h);
    max_diff = std::max(max_diff, std::abs(numeric - analytic[i]));
    scale = std::max({scale, std::abs(numeric), std::abs(analytic[i])});
  }
  return max_diff / scale;
}

}  // namespace supwma::nn
