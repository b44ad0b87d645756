#include "supwma/supwma.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include <json.hpp>

#include "error.hpp"
#include "geometry.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "synthdata.hpp"
#include "train.hpp"

struct supwma_streamlines {
  supwma::StreamlineSet set;
};

struct supwma_model {
  supwma::ModelBundle bundle;
};

namespace {

thread_local std::string g_last_error;

supwma_status record(supwma_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename F>
supwma_status guarded(F&& body) {
  try {
    g_last_error.clear();
    body();
    return SUPWMA_OK;
  } catch (const supwma::Error& e) {
    return record(static_cast<supwma_status>(e.code()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return record(SUPWMA_ERR_INVALID_ARGUMENT, std::string("invalid JSON: ") + e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return record(SUPWMA_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return record(SUPWMA_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return record(SUPWMA_ERR_INTERNAL, e.what());
  } catch (...) {
    return record(SUPWMA_ERR_INTERNAL, "unknown error");
  }
}

void need(const void* p, const char* what) {
  supwma::require(p != nullptr, supwma::ErrorCode::kInvalidArgument, std::string(what) + " is NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

supwma::ArchDescriptor to_descriptor(const supwma_arch& a) {
  supwma::ArchDescriptor d;
  d.points = a.points;
  d.encoder_dims = {a.encoder_dims[0], a.encoder_dims[1], a.encoder_dims[2]};
  d.classifier_hidden = {a.classifier_hidden[0], a.classifier_hidden[1]};
  d.projector_dims = {a.projector_dims[0], a.projector_dims[1]};
  d.classes = a.classes;
  d.with_tnets = a.with_tnets != 0;
  d.validate();
  return d;
}

std::string opt_string(const nlohmann::json& j, const char* key) {
  return j.contains(key) && !j.at(key).is_null() ? j.at(key).get<std::string>() : std::string();
}

}  // namespace

extern "C" {

const char* supwma_version(void) { return "0.1.0"; }

const char* supwma_last_error(void) { return g_last_error.c_str(); }

void supwma_string_free(char* s) { std::free(s); }

void supwma_arch_default(supwma_arch* arch) {
  if (!arch) return;
  *arch = supwma_arch{15, {64, 128, 1024}, {512, 256}, {1024, 128}, 199, 0};
}

supwma_status supwma_count_flops(const supwma_arch* arch, uint64_t* macs) {
  return guarded([&] {
    need(arch, "arch");
    need(macs, "macs");
    *macs = supwma::count_flops(to_descriptor(*arch));
  });
}

supwma_status supwma_streamlines_read(const char* slp_path, const char* labels_path, supwma_streamlines** out) {
  return guarded([&] {
    need(slp_path, "slp_path");
    need(out, "out");
    auto handle = std::make_unique<supwma_streamlines>();
    handle->set = supwma::read_slp(slp_path);
    if (labels_path) handle->set.labels = supwma::read_labels(labels_path, handle->set.size());
    *out = handle.release();
  });
}

supwma_status supwma_streamlines_write(const supwma_streamlines* set, const char* slp_path, const char* labels_path) {
  return guarded([&] {
    need(set, "set");
    need(slp_path, "slp_path");
    supwma::write_slp(set->set, slp_path);
    if (labels_path) {
      supwma::require(set->set.labels.has_value(), supwma::ErrorCode::kInvalidArgument, "streamline set has no labels");
      supwma::write_labels(*set->set.labels, labels_path);
    }
  });
}

size_t supwma_streamlines_count(const supwma_streamlines* set) { return set ? set->set.size() : 0; }

int supwma_streamlines_has_labels(const supwma_streamlines* set) { return set && set->set.labels ? 1 : 0; }

supwma_status supwma_streamlines_labels(const supwma_streamlines* set, int32_t* out, size_t capacity) {
  return guarded([&] {
    need(set, "set");
    supwma::require(set->set.labels.has_value(), supwma::ErrorCode::kInvalidArgument, "streamline set has no labels");
    const auto& labels = *set->set.labels;
    supwma::require(capacity >= labels.size(), supwma::ErrorCode::kInvalidArgument, "label buffer too small");
    if (!labels.empty()) {
      need(out, "out");
      std::memcpy(out, labels.data(), labels.size() * sizeof(int32_t));
    }
  });
}

supwma_status supwma_streamlines_apply_affine(supwma_streamlines* set, const double matrix[16]) {
  return guarded([&] {
    need(set, "set");
    need(matrix, "matrix");
    std::array<double, 16> m;
    std::memcpy(m.data(), matrix, sizeof(double) * 16);
    set->set = supwma::apply_affine(set->set, supwma::AffineTransform(m));
  });
}

void supwma_streamlines_free(supwma_streamlines* set) { delete set; }

supwma_status supwma_read_affine(const char* path, double matrix[16]) {
  return guarded([&] {
    need(path, "path");
    need(matrix, "matrix");
    const auto t = supwma::read_affine(path);
    std::memcpy(matrix, t.matrix().data(), sizeof(double) * 16);
  });
}

supwma_status supwma_write_labels(const int32_t* labels, size_t count, const char* path) {
  return guarded([&] {
    need(path, "path");
    if (count > 0) need(labels, "labels");
    supwma::write_labels(std::vector<int32_t>(labels, labels + count), path);
  });
}

supwma_status supwma_gen_dataset(const char* config_json, const char* out_dir, char** manifest_path) {
  return guarded([&] {
    need(out_dir, "out_dir");
    supwma::GenConfig cfg;
    if (config_json) cfg = supwma::GenConfig::from_json(nlohmann::json::parse(config_json));
    const auto path = supwma::gen_dataset(cfg, out_dir);
    if (manifest_path) *manifest_path = dup_string(path.string());
  });
}

supwma_status supwma_train(const char* request_json, supwma_phase phase, char** report_json) {
  return guarded([&] {
    need(request_json, "request_json");
    const auto req = nlohmann::json::parse(request_json);
    supwma::PipelineInputs in;
    in.train_slp = req.at("train_slp").get<std::string>();
    in.train_labels = req.at("train_labels").get<std::string>();
    in.out_dir = req.at("out_dir").get<std::string>();
    if (const auto v = opt_string(req, "val_slp"); !v.empty()) in.val_slp = v;
    if (const auto v = opt_string(req, "val_labels"); !v.empty()) in.val_labels = v;
    if (const auto v = opt_string(req, "init_checkpoint"); !v.empty()) in.init_checkpoint = v;
    in.arch.classes = 0;
    if (req.contains("arch")) {
      const auto& a = req.at("arch");
      in.arch.points = a.value("points", in.arch.points);
      in.arch.classes = a.value("classes", in.arch.classes);
    }
    const auto cfg = supwma::TrainConfig::from_json(req.value("config", nlohmann::json::object()));
    supwma::Phase p;
    switch (phase) {
      case SUPWMA_PHASE_SCL: p = supwma::Phase::kScl; break;
      case SUPWMA_PHASE_CLS: p = supwma::Phase::kCls; break;
      case SUPWMA_PHASE_BOTH: p = supwma::Phase::kBoth; break;
      default: supwma::fail(supwma::ErrorCode::kInvalidArgument, "unknown phase");
    }
    const auto result = supwma::run_pipeline(in, cfg, p);
    if (report_json) *report_json = dup_string(result.report.to_json().dump(2));
  });
}

supwma_status supwma_model_create(const supwma_arch* arch, uint64_t seed, supwma_model** out) {
  return guarded([&] {
    need(arch, "arch");
    need(out, "out");
    auto handle = std::make_unique<supwma_model>();
    handle->bundle = supwma::make_model(to_descriptor(*arch), seed);
    *out = handle.release();
  });
}

supwma_status supwma_model_load(const char* path, supwma_model** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    auto handle = std::make_unique<supwma_model>();
    handle->bundle = supwma::load_checkpoint(path);
    *out = handle.release();
  });
}

supwma_status supwma_model_save(const supwma_model* model, const char* path) {
  return guarded([&] {
    need(model, "model");
    need(path, "path");
    supwma::save_checkpoint(model->bundle, path);
  });
}

supwma_status supwma_model_arch(const supwma_model* model, supwma_arch* out) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    const auto& a = model->bundle.arch;
    supwma::require(a.encoder_dims.size() == 3 && a.classifier_hidden.size() == 2 && a.projector_dims.size() == 2,
                    supwma::ErrorCode::kInvalidArgument, "model depth is not representable as supwma_arch");
    *out = supwma_arch{static_cast<uint32_t>(a.points),
                       {static_cast<uint32_t>(a.encoder_dims[0]), static_cast<uint32_t>(a.encoder_dims[1]),
                        static_cast<uint32_t>(a.encoder_dims[2])},
                       {static_cast<uint32_t>(a.classifier_hidden[0]), static_cast<uint32_t>(a.classifier_hidden[1])},
                       {static_cast<uint32_t>(a.projector_dims[0]), static_cast<uint32_t>(a.projector_dims[1])},
                       static_cast<uint32_t>(a.classes),
                       0};
  });
}

void supwma_model_free(supwma_model* model) { delete model; }

supwma_status supwma_predict(const supwma_model* model, const supwma_streamlines* set, unsigned threads,
                             int32_t* labels, size_t capacity) {
  return guarded([&] {
    need(model, "model");
    need(set, "set");
    supwma::require(capacity >= set->set.size(), supwma::ErrorCode::kInvalidArgument, "label buffer too small");
    const auto predicted = supwma::predict(model->bundle, set->set, threads == 0 ? 1 : threads);
    if (!predicted.empty()) {
      need(labels, "labels");
      std::memcpy(labels, predicted.data(), predicted.size() * sizeof(int32_t));
    }
  });
}

supwma_status supwma_evaluate(const supwma_model* model, const supwma_streamlines* labeled,
                              const int32_t* expected_clusters, size_t expected_count, uint32_t cir_threshold,
                              unsigned threads, char** report_json) {
  return guarded([&] {
    need(model, "model");
    need(labeled, "labeled");
    need(report_json, "report_json");
    const auto& set = labeled->set;
    supwma::require(set.labels.has_value(), supwma::ErrorCode::kInvalidArgument, "evaluation set has no labels");
    supwma::require(set.size() > 0, supwma::ErrorCode::kInvalidArgument, "cannot evaluate an empty set");
    supwma::validate(set, static_cast<std::int32_t>(model->bundle.arch.classes));
    const auto predicted = supwma::predict(model->bundle, set, threads == 0 ? 1 : threads);
    auto report = supwma::make_report(*set.labels, predicted, model->bundle.arch.classes);
    if (expected_count > 0) {
      need(expected_clusters, "expected_clusters");
      report.cir_threshold = cir_threshold == 0 ? 20 : cir_threshold;
      report.cir = supwma::cluster_identification_rate(
          predicted, std::span<const int32_t>(expected_clusters, expected_count), report.cir_threshold);
    }
    *report_json = dup_string(report.to_json(true).dump(2));
  });
}

supwma_status supwma_cir(const int32_t* predicted, size_t count, const int32_t* expected_clusters,
                         size_t expected_count, uint32_t threshold, double* rate) {
  return guarded([&] {
    need(rate, "rate");
    if (count > 0) need(predicted, "predicted");
    if (expected_count > 0) need(expected_clusters, "expected_clusters");
    *rate = supwma::cluster_identification_rate(std::span<const int32_t>(predicted, count),
                                                std::span<const int32_t>(expected_clusters, expected_count),
                                                threshold);
  });
}

}  // extern "C"
