#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "nn.hpp"

namespace supwma::test {

/// Direct nested-loop evaluation of the summed supervised contrastive loss,
/// with no max subtraction and no shared intermediates.
inline double scl_nested_loop(const nn::Matrix& z, const std::vector<std::int32_t>& labels, double tau) {
  const auto m = static_cast<std::size_t>(z.rows());
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t positives = 0;
    for (std::size_t p = 0; p < m; ++p)
      if (p != i && labels[p] == labels[i]) ++positives;
    if (positives == 0) continue;
    double denom = 0.0;
    for (std::size_t a = 0; a < m; ++a) {
      if (a == i) continue;
      double dot = 0.0;
      for (Eigen::Index c = 0; c < z.cols(); ++c) dot += z(i, c) * z(a, c);
      denom += std::exp(dot / tau);
    }
    double inner = 0.0;
    for (std::size_t p = 0; p < m; ++p) {
      if (p == i || labels[p] != labels[i]) continue;
      double dot = 0.0;
      for (Eigen::Index c = 0; c < z.cols(); ++c) dot += z(i, c) * z(p, c);
      inner += std::log(std::exp(dot / tau) / denom);
    }
    total += -inner / static_cast<double>(positives);
  }
  return total;
}

}  // namespace supwma::test
