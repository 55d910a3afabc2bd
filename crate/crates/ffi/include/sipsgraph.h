#ifndef SIPSGRAPH_H
#define SIPSGRAPH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SgHead {
  SG_HEAD_IPS = 0,
  SG_HEAD_SIPS = 1,
  SG_HEAD_CSIPS = 2,
  SG_HEAD_IPDS = 3,
  SG_HEAD_NSD = 4,
  SG_HEAD_POINCARE = 5,
} SgHead;

typedef enum SgKernel {
  SG_KERNEL_INNER_PRODUCT = 0,
  SG_KERNEL_COSINE = 1,
  SG_KERNEL_NSD = 2,
  SG_KERNEL_NEG_POINCARE = 3,
  // Points are packed as means followed by variances.
  SG_KERNEL_NEG_JEFFREY_GAUSSIAN = 4,
} SgKernel;

// Result of every fallible call.
typedef enum SgStatus {
  SG_STATUS_OK = 0,
  SG_STATUS_NULL_POINTER = 1,
  SG_STATUS_INVALID_INPUT = 2,
  SG_STATUS_CONFIG = 3,
  SG_STATUS_NUMERICAL = 4,
  SG_STATUS_UNDEFINED_METRIC = 5,
  SG_STATUS_PARSE = 6,
  SG_STATUS_IO = 7,
  SG_STATUS_PANIC = 8,
} SgStatus;

// Opaque graph handle.
typedef struct SgGraph SgGraph;

// Opaque trained-model handle.
typedef struct SgModel SgModel;

// Training knobs for [`sg_train`]; start from [`sg_train_options_default`].
typedef struct SgTrainOptions {
  enum SgHead head;
  size_t dim;
  size_t num_negatives;
  size_t batch_size;
  size_t iterations;
  double learning_rate;
  size_t checkpoint_every;
  uint64_t seed;
  // Nonzero: select the checkpoint with the best reconstruction AUC.
  int32_t select_by_reconstruction;
} SgTrainOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. Valid until the
// next failing call on the same thread.
const char *sg_last_error_message(void);

// Transitive closure of a complete `branching`-ary tree of the given depth.
enum SgStatus sg_graph_generate_tree(size_t branching, size_t depth, struct SgGraph **out_graph);

// Planted-partition graph with `clusters` blocks of `nodes` nodes each.
enum SgStatus sg_graph_generate_clusters(size_t clusters,
                                         size_t nodes,
                                         double p_in,
                                         double p_out,
                                         uint64_t seed,
                                         struct SgGraph **out_graph);

// # Safety
// `path` must be a nul-terminated string; `out_graph` must be writable.
enum SgStatus sg_graph_load(const char *path, struct SgGraph **out_graph);

// # Safety
// `graph` must come from this library; `path` must be nul-terminated.
enum SgStatus sg_graph_save(const struct SgGraph *graph, const char *path);

// # Safety
// `graph` must come from this library.
enum SgStatus sg_graph_node_count(const struct SgGraph *graph, size_t *out_n);

// Number of linked unordered pairs.
//
// # Safety
// `graph` must come from this library.
enum SgStatus sg_graph_edge_count(const struct SgGraph *graph, size_t *out_m);

// # Safety
// `graph` must come from this library (or be NULL) and not be used afterwards.
void sg_graph_free(struct SgGraph *graph);

// Table encoder, SIPS, K = 5, hierarchy-reconstruction settings.
struct SgTrainOptions sg_train_options_default(void);

// Trains a table-encoder model on `graph`.
//
// # Safety
// `graph` must come from this library; `opts` and `out_model` must be valid.
enum SgStatus sg_train(const struct SgGraph *graph,
                       const struct SgTrainOptions *opts,
                       struct SgModel **out_model);

// # Safety
// `path` must be nul-terminated; `out_model` must be writable.
enum SgStatus sg_model_load(const char *path, struct SgModel **out_model);

// # Safety
// `model` must come from this library; `path` must be nul-terminated.
enum SgStatus sg_model_save(const struct SgModel *model, const char *path);

// Feature dimension `K`.
//
// # Safety
// `model` must come from this library.
enum SgStatus sg_model_dim(const struct SgModel *model, size_t *out_dim);

// Similarity of nodes `i` and `j`.
//
// # Safety
// Handles must come from this library.
enum SgStatus sg_model_score(const struct SgModel *model,
                             const struct SgGraph *graph,
                             size_t i,
                             size_t j,
                             double *out_score);

// Copies node `node`'s feature vector into `buf`, which must hold `len == K` values.
//
// # Safety
// Handles must come from this library; `buf` must hold `len` doubles.
enum SgStatus sg_model_embedding(const struct SgModel *model,
                                 const struct SgGraph *graph,
                                 size_t node,
                                 double *buf,
                                 size_t len);

// Reconstruction ROC-AUC with 1:1 sampled non-links.
//
// # Safety
// Handles must come from this library.
enum SgStatus sg_reconstruction_auc(const struct SgModel *model,
                                    const struct SgGraph *graph,
                                    uint64_t seed,
                                    double *out_auc);

// ROC-AUC of `n` scores against labels (nonzero = positive).
//
// # Safety
// `scores` and `labels` must each hold `n` elements.
enum SgStatus sg_auc(const double *scores, const uint8_t *labels, size_t n, double *out_auc);

// Evaluates a kernel on two points of length `len`.
//
// # Safety
// `y` and `y2` must each hold `len` doubles.
enum SgStatus sg_kernel_eval(enum SgKernel kernel,
                             const double *y,
                             const double *y2,
                             size_t len,
                             double *out_value);

// # Safety
// `model` must come from this library (or be NULL) and not be used afterwards.
void sg_model_free(struct SgModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SIPSGRAPH_H */
