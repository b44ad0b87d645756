#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "losses.hpp"
#include "metrics.hpp"
#include "model.hpp"

namespace supwma {

struct TrainConfig {
  double scl_lr = 0.01;
  std::size_t scl_batch = 1024;
  double cls_lr = 0.001;
  std::size_t cls_batch = 1024;
  std::size_t scl_epochs = 10;
  std::size_t cls_epochs = 20;
  double temperature = 0.1;
  std::uint64_t seed = 1;
  /// Held out from the training set when no explicit validation set is given.
  double validation_fraction = 0.1;
  bool shuffle = true;

  void validate() const;
  nlohmann::json to_json() const;
  /// Fields present in `j` override those of `base`.
  static TrainConfig from_json(const nlohmann::json& j, TrainConfig base);
  static TrainConfig from_json(const nlohmann::json& j);
};

struct LabeledFeatures {
  FeatureBatch features;
  std::vector<std::int32_t> labels;

  std::size_t size() const noexcept { return labels.size(); }
};

LabeledFeatures make_labeled(const StreamlineSet& set, std::size_t points);
LabeledFeatures subset(const LabeledFeatures& data, const std::vector<std::size_t>& indices);

struct PhaseReport {
  std::vector<double> loss;          // mean per-sample loss for each epoch
  std::vector<double> val_accuracy;  // empty without validation data
  double seconds = 0.0;

  nlohmann::json to_json() const;
};

/// Partitions [0, count) into batches of `batch` (shuffled when rng is set).
/// A trailing batch smaller than `min_batch` is merged into the one before it.
std::vector<std::vector<std::size_t>> make_batches(std::size_t count, std::size_t batch, std::size_t min_batch,
                                                   SeededRng* rng);

/// Per-class split into (train, validation) index lists, both ascending.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(
    const std::vector<std::int32_t>& labels, double validation_fraction, std::uint64_t seed);

/// Encoder + projector trained with the supervised contrastive loss.
PhaseReport train_scl_phase(ModelBundle& model, const LabeledFeatures& data, const TrainConfig& cfg);

/// Classifier trained with cross-entropy on the frozen encoder's features.
/// The encoder and projector are never modified.
PhaseReport train_cls_phase(ModelBundle& model, const LabeledFeatures& data, const TrainConfig& cfg,
                            const LabeledFeatures* validation = nullptr);

/// Classifier trained with cross-entropy directly on global features `g`
/// (one row per sample). Only model.classifier is updated.
PhaseReport train_classifier(ModelBundle& model, const nn::Matrix& g, std::span<const std::int32_t> labels,
                             const TrainConfig& cfg, const nn::Matrix* g_val = nullptr,
                             std::span<const std::int32_t> val_labels = {});

/// Ablation without contrastive pretraining: encoder and classifier trained
/// jointly with cross-entropy (cls_lr, cls_batch, cls_epochs).
PhaseReport train_end_to_end(ModelBundle& model, const LabeledFeatures& data, const TrainConfig& cfg,
                             const LabeledFeatures* validation = nullptr);

/// Global features in chunks, without caches.
nn::Matrix encode_all(const ModelBundle& model, const FeatureBatch& batch);

MetricsReport evaluate(const ModelBundle& model, const StreamlineSet& labeled, unsigned threads = 1);

enum class Phase { kScl, kCls, kBoth };

struct PipelineInputs {
  std::filesystem::path train_slp;
  std::filesystem::path train_labels;
  std::optional<std::filesystem::path> val_slp;
  std::optional<std::filesystem::path> val_labels;
  std::filesystem::path out_dir;
  /// Required for Phase::kCls: the contrastive-phase checkpoint.
  std::optional<std::filesystem::path> init_checkpoint;
  /// classes == 0 means "one more than the largest label seen".
  ArchDescriptor arch;
};

struct TrainReport {
  TrainConfig config;
  ArchDescriptor arch;
  std::string phase;
  std::size_t train_samples = 0;
  std::size_t validation_samples = 0;
  std::optional<PhaseReport> scl;
  std::optional<PhaseReport> cls;
  std::optional<MetricsReport> validation;
  std::filesystem::path checkpoint;

  nlohmann::json to_json() const;
};

struct PipelineResult {
  ModelBundle model;
  TrainReport report;
};

/// resample -> contrastive phase -> classifier phase -> validation metrics,
/// then writes `scl.ckpt` / `model.ckpt` and `train_report.json` to out_dir.
PipelineResult run_pipeline(const PipelineInputs& inputs, const TrainConfig& cfg, Phase phase);

}  // namespace supwma
