#pragma once

#include <cstdint>
#include <span>

#include "nn.hpp"

namespace supwma {

struct SclConfig {
  double temperature = 0.1;
};

/// Supervised contrastive loss over a batch of unit-norm rows `z`.
///
///   L = sum_i  -1/|P(i)| sum_{p in P(i)} log( exp(z_i.z_p/t) / sum_{a != i} exp(z_i.z_a/t) )
///
/// P(i) holds the other rows sharing i's label. Anchors without positives
/// contribute zero. The loss is summed over anchors, not averaged.
nn::LossGrad scl_loss(const nn::Matrix& z, std::span<const std::int32_t> labels, const SclConfig& cfg = {});

/// Cross-entropy for the downstream classifier.
inline nn::LossGrad ce_loss(const nn::Matrix& logits, std::span<const std::int32_t> labels) {
  return nn::softmax_cross_entropy(logits, labels);
}

}  // namespace supwma
