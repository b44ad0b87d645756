/*
 * supwma: streamline classification with a point-cloud encoder,
 * supervised contrastive pretraining and a frozen-encoder classifier.
 *
 * C interface. Every function that can fail returns a supwma_status; on
 * failure supwma_last_error() describes the problem. Objects are opaque
 * handles released with their matching *_free function. Strings returned
 * through char** out-parameters are released with supwma_string_free().
 */
#ifndef SUPWMA_SUPWMA_H
#define SUPWMA_SUPWMA_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(SUPWMA_BUILDING)
#    define SUPWMA_API __declspec(dllexport)
#  else
#    define SUPWMA_API __declspec(dllimport)
#  endif
#else
#  define SUPWMA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum supwma_status {
  SUPWMA_OK = 0,
  SUPWMA_ERR_INVALID_ARGUMENT = 1, /* bad parameter, label or configuration */
  SUPWMA_ERR_IO = 2,               /* file could not be opened or written */
  SUPWMA_ERR_FORMAT = 3,           /* malformed SLP1, label, affine or checkpoint file */
  SUPWMA_ERR_NUMERICAL = 4,        /* non-finite values or degenerate features */
  SUPWMA_ERR_INTERNAL = 5
} supwma_status;

typedef enum supwma_phase {
  SUPWMA_PHASE_SCL = 0,  /* contrastive pretraining of encoder + projector */
  SUPWMA_PHASE_CLS = 1,  /* classifier on the frozen encoder */
  SUPWMA_PHASE_BOTH = 2
} supwma_phase;

typedef struct supwma_streamlines supwma_streamlines;
typedef struct supwma_model supwma_model;

/* Network widths. Defaults: 15 points, encoder 64/128/1024, classifier
 * 512/256/classes, projector 1024/128, 199 classes. */
typedef struct supwma_arch {
  uint32_t points;
  uint32_t encoder_dims[3];
  uint32_t classifier_hidden[2];
  uint32_t projector_dims[2];
  uint32_t classes;
  int with_tnets; /* FLOPs estimate only */
} supwma_arch;

SUPWMA_API const char* supwma_version(void);

/* Message for the most recent failure on the calling thread. */
SUPWMA_API const char* supwma_last_error(void);

SUPWMA_API void supwma_string_free(char* s);

SUPWMA_API void supwma_arch_default(supwma_arch* arch);

/* Multiply-accumulates per streamline for one inference pass. */
SUPWMA_API supwma_status supwma_count_flops(const supwma_arch* arch, uint64_t* macs);

/* ---- streamline sets ---------------------------------------------------- */

/* labels_path may be NULL. */
SUPWMA_API supwma_status supwma_streamlines_read(const char* slp_path, const char* labels_path,
                                                 supwma_streamlines** out);
/* labels_path may be NULL; it is an error to request labels the set lacks. */
SUPWMA_API supwma_status supwma_streamlines_write(const supwma_streamlines* set, const char* slp_path,
                                                  const char* labels_path);
SUPWMA_API size_t supwma_streamlines_count(const supwma_streamlines* set);
SUPWMA_API int supwma_streamlines_has_labels(const supwma_streamlines* set);
SUPWMA_API supwma_status supwma_streamlines_labels(const supwma_streamlines* set, int32_t* out, size_t capacity);
/* Row-major 4x4 with last row (0,0,0,1); applied in place. */
SUPWMA_API supwma_status supwma_streamlines_apply_affine(supwma_streamlines* set, const double matrix[16]);
SUPWMA_API void supwma_streamlines_free(supwma_streamlines* set);

/* Text file of 16 whitespace-separated numbers, row-major. */
SUPWMA_API supwma_status supwma_read_affine(const char* path, double matrix[16]);

/* CSV with header "index,label". */
SUPWMA_API supwma_status supwma_write_labels(const int32_t* labels, size_t count, const char* path);

/* ---- synthetic data ------------------------------------------------------ */

/* config_json may be NULL for defaults. Writes SLP1, label CSVs and
 * manifest.json into out_dir; *manifest_path receives the manifest path. */
SUPWMA_API supwma_status supwma_gen_dataset(const char* config_json, const char* out_dir, char** manifest_path);

/* ---- training ------------------------------------------------------------ */

/* request_json keys: train_slp, train_labels, out_dir (required);
 * val_slp, val_labels, init_checkpoint, arch {points, classes}, config
 * {scl_lr, scl_batch, cls_lr, cls_batch, scl_epochs, cls_epochs,
 *  temperature, seed, validation_fraction, shuffle}.
 * *report_json receives the training report (may be NULL). */
SUPWMA_API supwma_status supwma_train(const char* request_json, supwma_phase phase, char** report_json);

/* ---- models -------------------------------------------------------------- */

SUPWMA_API supwma_status supwma_model_create(const supwma_arch* arch, uint64_t seed, supwma_model** out);
SUPWMA_API supwma_status supwma_model_load(const char* path, supwma_model** out);
SUPWMA_API supwma_status supwma_model_save(const supwma_model* model, const char* path);
SUPWMA_API supwma_status supwma_model_arch(const supwma_model* model, supwma_arch* out);
SUPWMA_API void supwma_model_free(supwma_model* model);

/* Predicted class per streamline, in input order. capacity must be at least
 * supwma_streamlines_count(set). threads == 0 is treated as 1. */
SUPWMA_API supwma_status supwma_predict(const supwma_model* model, const supwma_streamlines* set, unsigned threads,
                                        int32_t* labels, size_t capacity);

/* Accuracy, macro F1 and per-class F1 as JSON. When expected_count > 0 the
 * cluster identification rate over expected_clusters is included, using
 * cir_threshold (0 selects the default of 20). */
SUPWMA_API supwma_status supwma_evaluate(const supwma_model* model, const supwma_streamlines* labeled,
                                         const int32_t* expected_clusters, size_t expected_count,
                                         uint32_t cir_threshold, unsigned threads, char** report_json);

/* Cluster identification rate of predicted labels against expected ids. */
SUPWMA_API supwma_status supwma_cir(const int32_t* predicted, size_t count, const int32_t* expected_clusters,
                                    size_t expected_count, uint32_t threshold, double* rate);

#ifdef __cplusplus
}
#endif

#endif /* SUPWMA_SUPWMA_H */
