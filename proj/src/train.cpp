#include "train.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <set>

#include "error.hpp"
#include "log.hpp"

namespace supwma {

namespace {

using nn::Matrix;
using Clock = std::chrono::steady_clock;

constexpr Eigen::Index kEncodeChunk = 2048;

struct LayerAdam {
  nn::AdamState weights;
  nn::AdamState bias;
};

std::vector<LayerAdam> make_adam(const std::vector<nn::DenseLayer>& layers) {
  std::vector<LayerAdam> states;
  for (const auto& l : layers) {
    states.push_back({nn::AdamState(static_cast<std::size_t>(l.weights.size())),
                      nn::AdamState(static_cast<std::size_t>(l.bias.size()))});
  }
  return states;
}

void adam_update(std::vector<nn::DenseLayer>& layers, const std::vector<nn::DenseGrads>& grads,
                 std::vector<LayerAdam>& states, double lr) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    nn::adam_step(nn::flat(layers[l].weights), nn::flat(grads[l].weights), states[l].weights, lr);
    nn::adam_step(nn::flat(layers[l].bias), nn::flat(grads[l].bias), states[l].bias, lr);
  }
}

std::vector<std::int32_t> pick(const std::vector<std::int32_t>& labels, const std::vector<std::size_t>& idx) {
  std::vector<std::int32_t> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(labels[i]);
  return out;
}

Matrix pick_rows(const Matrix& m, const std::vector<std::size_t>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double accuracy_of(const Matrix& logits, const std::vector<std::int32_t>& labels) {
  const auto predicted = argmax_rows(logits);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predicted[i] == labels[i];
  return labels.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(labels.size());
}

void check_labels(const LabeledFeatures& data, std::size_t classes) {
  require(data.features.count == data.labels.size(), ErrorCode::kInvalidArgument,
          "feature and label counts differ");
  for (std::int32_t y : data.labels) {
    require(y >= 0 && static_cast<std::size_t>(y) < classes, ErrorCode::kInvalidArgument,
            "label out of range: " + std::to_string(y));
  }
}

nlohmann::json arch_json(const ArchDescriptor& a) {
  return {{"points", a.points},
          {"encoder_dims", a.encoder_dims},
          {"classifier_hidden", a.classifier_hidden},
          {"projector_dims", a.projector_dims},
          {"classes", a.classes}};
}

StreamlineSet read_labeled(const std::filesystem::path& slp, const std::filesystem::path& labels) {
  StreamlineSet set = read_slp(slp);
  set.labels = read_labels(labels, set.size());
  validate(set);
  return set;
}

}  // namespace

void TrainConfig::validate() const {
  require(scl_lr >= 0.0 && cls_lr >= 0.0, ErrorCode::kInvalidArgument, "learning rates must be >= 0");
  require(scl_batch >= 2 && cls_batch >= 2, ErrorCode::kInvalidArgument, "batch sizes must be >= 2");
  require(scl_epochs >= 1 && cls_epochs >= 1, ErrorCode::kInvalidArgument, "epoch counts must be >= 1");
  require(temperature > 0.0, ErrorCode::kInvalidArgument, "temperature must be positive");
  require(validation_fraction >= 0.0 && validation_fraction < 1.0, ErrorCode::kInvalidArgument,
          "validation fraction must be in [0, 1)");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"scl_lr", scl_lr},         {"scl_batch", scl_batch},   {"cls_lr", cls_lr},
          {"cls_batch", cls_batch},   {"scl_epochs", scl_epochs}, {"cls_epochs", cls_epochs},
          {"temperature", temperature}, {"seed", seed},          {"validation_fraction", validation_fraction},
          {"shuffle", shuffle}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) { return from_json(j, TrainConfig{}); }

TrainConfig TrainConfig::from_json(const nlohmann::json& j, TrainConfig base) {
  try {
    base.scl_lr = j.value("scl_lr", base.scl_lr);
    base.scl_batch = j.value("scl_batch", base.scl_batch);
    base.cls_lr = j.value("cls_lr", base.cls_lr);
    base.cls_batch = j.value("cls_batch", base.cls_batch);
    base.scl_epochs = j.value("scl_epochs", base.scl_epochs);
    base.cls_epochs = j.value("cls_epochs", base.cls_epochs);
    base.temperature = j.value("temperature", base.temperature);
    base.seed = j.value("seed", base.seed);
    base.validation_fraction = j.value("validation_fraction", base.validation_fraction);
    base.shuffle = j.value("shuffle", base.shuffle);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("bad training config: ") + e.what());
  }
  return base;
}

LabeledFeatures make_labeled(const StreamlineSet& set, std::size_t points) {
  require(set.labels.has_value(), ErrorCode::kInvalidArgument, "streamline set has no labels");
  return {make_feature_batch(set, points), *set.labels};
}

LabeledFeatures subset(const LabeledFeatures& data, const std::vector<std::size_t>& indices) {
  return {gather(data.features, indices), pick(data.labels, indices)};
}

nlohmann::json PhaseReport::to_json() const {
  nlohmann::json j = {{"epochs", loss.size()}, {"loss", loss}, {"seconds", seconds}};
  if (!val_accuracy.empty()) j["val_accuracy"] = val_accuracy;
  return j;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t count, std::size_t batch, std::size_t min_batch,
                                                   SeededRng* rng) {
  require(batch >= 1, ErrorCode::kInvalidArgument, "batch size must be >= 1");
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  if (rng) rng->shuffle(order.begin(), order.end());

  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < count; start += batch) {
    const std::size_t stop = std::min(count, start + batch);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  if (batches.size() >= 2 && batches.back().size() < min_batch) {
    auto tail = std::move(batches.back());
    batches.pop_back();
    batches.back().insert(batches.back().end(), tail.begin(), tail.end());
  }
  return batches;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(
    const std::vector<std::int32_t>& labels, double validation_fraction, std::uint64_t seed) {
  std::map<std::int32_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  SeededRng rng(SeededRng::derive(seed, 10));
  std::vector<std::size_t> train, val;
  for (auto& [label, idx] : by_class) {
    rng.shuffle(idx.begin(), idx.end());
    std::size_t take = 0;
    if (validation_fraction > 0.0 && idx.size() >= 2) {
      take = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(idx.size())));
      take = std::clamp<std::size_t>(take, 1, idx.size() - 1);
    }
    val.insert(val.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
    train.insert(train.end(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
  return {train, val};
}

PhaseReport train_scl_phase(ModelBundle& model, const LabeledFeatures& data, const TrainConfig& cfg) {
  cfg.validate();
  check_labels(data, model.arch.classes);
  require(std::set<std::int32_t>(data.labels.begin(), data.labels.end()).size() >= 2, ErrorCode::kInvalidArgument,
          "contrastive phase requires >=2 classes");

  const auto start = Clock::now();
  SeededRng rng(SeededRng::derive(cfg.seed, 1));
  auto enc_adam = make_adam(model.encoder);
  auto proj_adam = make_adam(model.projector);
  const SclConfig scl{cfg.temperature};

  PhaseReport report;
  for (std::size_t epoch = 0; epoch < cfg.scl_epochs; ++epoch) {
    const auto batches = make_batches(data.size(), cfg.scl_batch, 2, cfg.shuffle ? &rng : nullptr);
    double loss_sum = 0.0;
    for (const auto& idx : batches) {
      const FeatureBatch batch = gather(data.features, idx);
      const auto labels = pick(data.labels, idx);

      EncoderCache enc_cache;
      ProjectorCache proj_cache;
      const Matrix g = encode(model, batch, &enc_cache);
      const Matrix z = project(model, g, &proj_cache);
      const nn::LossGrad loss = scl_loss(z, labels, scl);
      require(std::isfinite(loss.loss), ErrorCode::kNumerical, "contrastive loss is not finite");

      std::vector<nn::DenseGrads> proj_grads;
      const Matrix grad_g = project_backward(model, proj_cache, loss.grad, proj_grads);
      const auto enc_grads = encode_backward(model, enc_cache, grad_g);
      adam_update(model.projector, proj_grads, proj_adam, cfg.scl_lr);
      adam_update(model.encoder, enc_grads, enc_adam, cfg.scl_lr);
      loss_sum += loss.loss;
    }
    report.loss.push_back(loss_sum / static_cast<double>(data.size()));
    log().info("scl epoch {}/{}: loss {:.6f} ({:.1f}s)", epoch + 1, cfg.scl_epochs, report.loss.back(),
               seconds_since(start));
  }
  report.seconds = seconds_since(start);
  return report;
}

Matrix encode_all(const ModelBundle& model, const FeatureBatch& batch) {
  Matrix g(static_cast<Eigen::Index>(batch.count), static_cast<Eigen::Index>(model.arch.global_dim()));
  const auto count = static_cast<Eigen::Index>(batch.count);
  const auto n = static_cast<Eigen::Index>(batch.points);
  for (Eigen::Index s = 0; s < count; s += kEncodeChunk) {
    const Eigen::Index len = std::min(kEncodeChunk, count - s);
    FeatureBatch part{static_cast<std::size_t>(len), batch.points, batch.coords.middleRows(s * n, len * n)};
    g.middleRows(s, len) = encode(model, part);
  }
  return g;
}

PhaseReport train_classifier(ModelBundle& model, const Matrix& g, std::span<const std::int32_t> labels,
                             const TrainConfig& cfg, const Matrix* g_val, std::span<const std::int32_t> val_labels) {
  cfg.validate();
  require(g.rows() > 0, ErrorCode::kInvalidArgument, "classifier phase needs training data");
  require(static_cast<std::size_t>(g.rows()) == labels.size(), ErrorCode::kInvalidArgument,
          "feature and label counts differ");
  const bool has_val = g_val != nullptr && g_val->rows() > 0;
  if (has_val) {
    require(static_cast<std::size_t>(g_val->rows()) == val_labels.size(), ErrorCode::kInvalidArgument,
            "validation feature and label counts differ");
  }

  const auto start = Clock::now();
  const std::vector<std::int32_t> all_labels(labels.begin(), labels.end());
  SeededRng rng(SeededRng::derive(cfg.seed, 2));
  auto cls_adam = make_adam(model.classifier);
  PhaseReport report;
  for (std::size_t epoch = 0; epoch < cfg.cls_epochs; ++epoch) {
    const auto batches = make_batches(labels.size(), cfg.cls_batch, 1, cfg.shuffle ? &rng : nullptr);
    double loss_sum = 0.0;
    for (const auto& idx : batches) {
      const Matrix gb = pick_rows(g, idx);
      const auto batch_labels = pick(all_labels, idx);
      MlpCache cache;
      const Matrix logits = classify(model, gb, &cache);
      const nn::LossGrad loss = ce_loss(logits, batch_labels);
      std::vector<nn::DenseGrads> grads;
      classify_backward(model, cache, loss.grad, grads);
      adam_update(model.classifier, grads, cls_adam, cfg.cls_lr);
      loss_sum += loss.loss * static_cast<double>(idx.size());
    }
    report.loss.push_back(loss_sum / static_cast<double>(labels.size()));
    if (has_val) {
      report.val_accuracy.push_back(
          accuracy_of(classify(model, *g_val), std::vector<std::int32_t>(val_labels.begin(), val_labels.end())));
    }
    log().info("cls epoch {}/{}: loss {:.6f}{} ({:.1f}s)", epoch + 1, cfg.cls_epochs, report.loss.back(),
               report.val_accuracy.empty() ? std::string()
                                           : fmt::format(", val acc {:.4f}", report.val_accuracy.back()),
               seconds_since(start));
  }
  report.seconds = seconds_since(start);
  return report;
}

PhaseReport train_cls_phase(ModelBundle& model, const LabeledFeatures& data, const TrainConfig& cfg,
                            const LabeledFeatures* validation) {
  cfg.validate();
  check_labels(data, model.arch.classes);
  if (validation) check_labels(*validation, model.arch.classes);
  require(data.size() > 0, ErrorCode::kInvalidArgument, "classifier phase needs training data");

  const auto start = Clock::now();
  // The encoder is frozen, so its features are computed once.
  const Matrix g = encode_all(model, data.features);
  Matrix g_val;
  std::span<const std::int32_t> val_labels;
  if (validation && validation->size() > 0) {
    g_val = encode_all(model, validation->features);
    val_labels = validation->labels;
  }
  PhaseReport report = train_classifier(model, g, data.labels, cfg, &g_val, val_labels);
  report.seconds = seconds_since(start);
  return report;
}

PhaseReport train_end_to_end(ModelBundle& model, const LabeledFeatures& data, const TrainConfig& cfg,
                             const LabeledFeatures* validation) {
  cfg.validate();
  check_labels(data, model.arch.classes);
  const auto start = Clock::now();
  SeededRng rng(SeededRng::derive(cfg.seed, 3));
  auto enc_adam = make_adam(model.encoder);
  auto cls_adam = make_adam(model.classifier);
  PhaseReport report;
  for (std::size_t epoch = 0; epoch < cfg.cls_epochs; ++epoch) {
    const auto batches = make_batches(data.size(), cfg.cls_batch, 1, cfg.shuffle ? &rng : nullptr);
    double loss_sum = 0.0;
    for (const auto& idx : batches) {
      const FeatureBatch batch = gather(data.features, idx);
      const auto labels = pick(data.labels, idx);
      EncoderCache enc_cache;
      MlpCache cls_cache;
      const Matrix g = encode(model, batch, &enc_cache);
      const nn::LossGrad loss = ce_loss(classify(model, g, &cls_cache), labels);
      std::vector<nn::DenseGrads> cls_grads;
      const Matrix grad_g = classify_backward(model, cls_cache, loss.grad, cls_grads, true);
      const auto enc_grads = encode_backward(model, enc_cache, grad_g);
      adam_update(model.classifier, cls_grads, cls_adam, cfg.cls_lr);
      adam_update(model.encoder, enc_grads, enc_adam, cfg.cls_lr);
      loss_sum += loss.loss * static_cast<double>(idx.size());
    }
    report.loss.push_back(loss_sum / static_cast<double>(data.size()));
    if (validation && validation->size() > 0) {
      report.val_accuracy.push_back(
          accuracy_of(classify(model, encode_all(model, validation->features)), validation->labels));
    }
    log().info("end-to-end epoch {}/{}: loss {:.6f} ({:.1f}s)", epoch + 1, cfg.cls_epochs, report.loss.back(),
               seconds_since(start));
  }
  report.seconds = seconds_since(start);
  return report;
}

MetricsReport evaluate(const ModelBundle& model, const StreamlineSet& labeled, unsigned threads) {
  require(labeled.labels.has_value(), ErrorCode::kInvalidArgument, "evaluation set has no labels");
  require(labeled.size() > 0, ErrorCode::kInvalidArgument, "cannot evaluate an empty set");
  validate(labeled, static_cast<std::int32_t>(model.arch.classes));
  const auto predicted = predict(model, labeled, threads);
  return make_report(*labeled.labels, predicted, model.arch.classes);
}

nlohmann::json TrainReport::to_json() const {
  nlohmann::json j = {{"config", config.to_json()},
                      {"arch", arch_json(arch)},
                      {"phase", phase},
                      {"train_samples", train_samples},
                      {"validation_samples", validation_samples},
                      {"checkpoint", checkpoint.string()},
                      {"timing_note", "seconds fields are wall-clock and excluded from reproducibility checks"}};
  if (scl) j["scl"] = scl->to_json();
  if (cls) j["cls"] = cls->to_json();
  if (validation) j["validation"] = validation->to_json();
  return j;
}

PipelineResult run_pipeline(const PipelineInputs& inputs, const TrainConfig& cfg, Phase phase) {
  cfg.validate();
  require(phase != Phase::kCls || inputs.init_checkpoint.has_value(), ErrorCode::kInvalidArgument,
          "classifier phase requires an existing contrastive-phase checkpoint");
  require(inputs.val_slp.has_value() == inputs.val_labels.has_value(), ErrorCode::kInvalidArgument,
          "validation streamlines and labels must be given together");

  StreamlineSet train_set;
  std::optional<StreamlineSet> val_set;
  try {
    train_set = read_labeled(inputs.train_slp, inputs.train_labels);
    if (inputs.val_slp) val_set = read_labeled(*inputs.val_slp, *inputs.val_labels);
  } catch (const Error& e) {
    fail(e.code(), std::string("loading dataset: ") + e.what());
  }
  require(train_set.size() > 0, ErrorCode::kInvalidArgument, "training set is empty");

  PipelineResult result;
  ModelBundle& model = result.model;
  if (phase == Phase::kCls) {
    model = load_checkpoint(*inputs.init_checkpoint);
  } else {
    ArchDescriptor arch = inputs.arch;
    if (arch.classes == 0) {
      std::int32_t top = *std::max_element(train_set.labels->begin(), train_set.labels->end());
      if (val_set && !val_set->labels->empty()) {
        top = std::max(top, *std::max_element(val_set->labels->begin(), val_set->labels->end()));
      }
      arch.classes = std::max<std::size_t>(2, static_cast<std::size_t>(top) + 1);
    }
    model = make_model(arch, cfg.seed);
  }
  const std::size_t n = model.arch.points;

  LabeledFeatures all_train;
  std::optional<LabeledFeatures> validation;
  try {
    all_train = make_labeled(train_set, n);
    if (val_set) validation = make_labeled(*val_set, n);
  } catch (const Error& e) {
    fail(e.code(), std::string("resampling: ") + e.what());
  }
  LabeledFeatures train = std::move(all_train);
  if (!validation && cfg.validation_fraction > 0.0) {
    auto [train_idx, val_idx] = stratified_split(train.labels, cfg.validation_fraction, cfg.seed);
    validation = subset(train, val_idx);
    train = subset(train, train_idx);
  }

  std::filesystem::create_directories(inputs.out_dir);
  TrainReport& report = result.report;
  report.config = cfg;
  report.phase = phase == Phase::kScl ? "scl" : phase == Phase::kCls ? "cls" : "both";
  report.train_samples = train.size();
  report.validation_samples = validation ? validation->size() : 0;

  if (phase != Phase::kCls) {
    try {
      report.scl = train_scl_phase(model, train, cfg);
    } catch (const Error& e) {
      fail(e.code(), std::string("contrastive phase: ") + e.what());
    }
    model.stage = "scl";
    report.checkpoint = inputs.out_dir / "scl.ckpt";
    save_checkpoint(model, report.checkpoint);
  }
  if (phase != Phase::kScl) {
    require(model.stage.rfind("scl", 0) == 0, ErrorCode::kInvalidArgument,
            "classifier phase needs a contrastive-phase checkpoint (stage is '" + model.stage + "')");
    try {
      report.cls = train_cls_phase(model, train, cfg, validation ? &*validation : nullptr);
    } catch (const Error& e) {
      fail(e.code(), std::string("classifier phase: ") + e.what());
    }
    model.stage = "scl+cls";
    if (validation && validation->size() > 0) {
      const auto predicted = argmax_rows(classify(model, encode_all(model, validation->features)));
      report.validation = make_report(validation->labels, predicted, model.arch.classes);
    }
    report.checkpoint = inputs.out_dir / "model.ckpt";
    save_checkpoint(model, report.checkpoint);
  }
  report.arch = model.arch;

  std::ofstream out(inputs.out_dir / "train_report.json", std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write train_report.json");
  out << report.to_json().dump(2) << '\n';
  return result;
}

}  // namespace supwma
