#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "geometry.hpp"
#include "nn.hpp"

namespace supwma {

/// Layer widths of the point encoder, projector and classifier.
struct ArchDescriptor {
  std::size_t points = 15;
  std::vector<std::size_t> encoder_dims{64, 128, 1024};
  std::vector<std::size_t> classifier_hidden{512, 256};
  std::vector<std::size_t> projector_dims{1024, 128};
  std::size_t classes = 199;
  /// Only consulted by count_flops().
  bool with_tnets = false;

  void validate() const;
  std::size_t global_dim() const { return encoder_dims.back(); }
  std::size_t contrastive_dim() const { return projector_dims.back(); }

  friend bool operator==(const ArchDescriptor&, const ArchDescriptor&) = default;
};

struct ModelBundle {
  ArchDescriptor arch;
  std::vector<nn::DenseLayer> encoder;
  std::vector<nn::DenseLayer> projector;
  std::vector<nn::DenseLayer> classifier;
  std::uint64_t seed = 0;
  /// Training stages applied so far, e.g. "init", "scl", "scl+cls".
  std::string stage = "init";
};

/// Glorot-uniform weights, zero biases. Each layer group draws from its own
/// derived stream so changing the class count leaves the encoder untouched.
ModelBundle make_model(const ArchDescriptor& arch, std::uint64_t seed);

/// M streamlines of `points` points each, stacked point-major:
/// rows [m*points, (m+1)*points) belong to streamline m.
struct FeatureBatch {
  std::size_t count = 0;
  std::size_t points = 0;
  nn::Matrix coords;  // (count * points) x 3
};

FeatureBatch make_feature_batch(const StreamlineSet& set, std::size_t points);
FeatureBatch make_feature_batch(const std::vector<Streamline>& streamlines, std::size_t points);
FeatureBatch gather(const FeatureBatch& batch, const std::vector<std::size_t>& indices);

struct EncoderCache {
  std::vector<nn::Matrix> activations;  // input to each encoder layer
  nn::Matrix pooled_pre;                // max over points of the last pre-activation
  nn::IndexMatrix argmax;
};

/// Shared per-point MLP (ReLU after every layer) followed by a column-wise
/// max over each streamline's points. Returns the M x global_dim feature g.
///
/// The last layer is evaluated in chunks and pooled before its ReLU;
/// relu(max(x)) == max(relu(x)) holds bitwise, and the n x 1024 activation
/// never needs to be materialised for the whole batch.
nn::Matrix encode(const ModelBundle& model, const FeatureBatch& batch, EncoderCache* cache = nullptr);

/// Weight/bias gradients for each encoder layer given dL/dg.
std::vector<nn::DenseGrads> encode_backward(const ModelBundle& model, const EncoderCache& cache,
                                            const nn::Matrix& grad_global);

struct MlpCache {
  std::vector<nn::Matrix> activations;  // input to each layer
};

struct ProjectorCache {
  MlpCache mlp;
  nn::L2Normalized normalized;
};

/// 1024 -> 1024 (ReLU) -> 128 -> row L2 normalisation.
nn::Matrix project(const ModelBundle& model, const nn::Matrix& global, ProjectorCache* cache = nullptr);
/// Returns dL/dg; fills `grads` with one entry per projector layer.
nn::Matrix project_backward(const ModelBundle& model, const ProjectorCache& cache, const nn::Matrix& grad_z,
                            std::vector<nn::DenseGrads>& grads);

/// 1024 -> 512 (ReLU) -> 256 (ReLU) -> k logits.
nn::Matrix classify(const ModelBundle& model, const nn::Matrix& global, MlpCache* cache = nullptr);
nn::Matrix classify_backward(const ModelBundle& model, const MlpCache& cache, const nn::Matrix& grad_logits,
                             std::vector<nn::DenseGrads>& grads, bool want_input_grad = false);

/// Row-wise argmax, lowest index on ties.
std::vector<std::int32_t> argmax_rows(const nn::Matrix& logits);

/// Resamples each streamline to arch.points and returns predicted labels in
/// input order. `threads` > 1 splits the set into contiguous ranges.
std::vector<std::int32_t> predict(const ModelBundle& model, const StreamlineSet& set, unsigned threads = 1);

/// Multiply-accumulates per streamline for inference (encoder + classifier).
std::uint64_t count_flops(const ArchDescriptor& arch);

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const ModelBundle& model, const std::filesystem::path& path);
ModelBundle load_checkpoint(const std::filesystem::path& path);

}  // namespace supwma
