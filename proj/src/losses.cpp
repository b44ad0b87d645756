#include "losses.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "error.hpp"

namespace supwma {

nn::LossGrad scl_loss(const nn::Matrix& z, std::span<const std::int32_t> labels, const SclConfig& cfg) {
  const Eigen::Index m = z.rows();
  require(m >= 2, ErrorCode::kInvalidArgument, "contrastive loss needs a batch of at least 2");
  require(static_cast<std::size_t>(m) == labels.size(), ErrorCode::kInvalidArgument,
          "contrastive loss: label count does not match batch");
  require(cfg.temperature > 0.0, ErrorCode::kInvalidArgument, "temperature must be positive");
  for (Eigen::Index i = 0; i < m; ++i) {
    const double norm = z.row(i).norm();
    require(std::abs(norm - 1.0) <= 1e-6, ErrorCode::kInvalidArgument,
            "contrastive loss: row " + std::to_string(i) + " is not unit-norm");
  }

  const double inv_t = 1.0 / cfg.temperature;
  nn::Matrix sim(m, m);
  sim.noalias() = z * z.transpose();
  sim *= inv_t;

  // grad_sim(i, a) = dL / d sim(i, a)
  nn::Matrix grad_sim = nn::Matrix::Zero(m, m);
  double loss = 0.0;
  std::vector<Eigen::Index> positives;
  for (Eigen::Index i = 0; i < m; ++i) {
    positives.clear();
    for (Eigen::Index a = 0; a < m; ++a) {
      if (a != i && labels[static_cast<std::size_t>(a)] == labels[static_cast<std::size_t>(i)]) {
        positives.push_back(a);
      }
    }
    if (positives.empty()) continue;

    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index a = 0; a < m; ++a) {
      if (a != i) mx = std::max(mx, sim(i, a));
    }
    double denom = 0.0;
    for (Eigen::Index a = 0; a < m; ++a) {
      if (a != i) denom += std::exp(sim(i, a) - mx);
    }
    const double log_denom = mx + std::log(denom);
    const double inv_p = 1.0 / static_cast<double>(positives.size());

    double anchor = 0.0;
    for (Eigen::Index p : positives) anchor += sim(i, p) - log_denom;
    loss -= inv_p * anchor;

    for (Eigen::Index a = 0; a < m; ++a) {
      if (a != i) grad_sim(i, a) = std::exp(sim(i, a) - log_denom);
    }
    for (Eigen::Index p : positives) grad_sim(i, p) -= inv_p;
  }

  // sim = z z^T / t, so dL/dz = (G + G^T) z / t.
  nn::Matrix sym = grad_sim + grad_sim.transpose();
  nn::LossGrad out{loss, nn::Matrix(m, z.cols())};
  out.grad.noalias() = sym * z;
  out.grad *= inv_t;
  return out;
}

}  // namespace supwma
