#ifndef TREEBEC_H
#define TREEBEC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum TreebecStatus {
  TREEBEC_STATUS_OK = 0,
  TREEBEC_STATUS_NULL_POINTER = 1,
  TREEBEC_STATUS_INVALID_ARGUMENT = 2,
  TREEBEC_STATUS_DOMAIN = 3,
  TREEBEC_STATUS_CAPACITY = 4,
  TREEBEC_STATUS_NO_CONVERGENCE = 5,
  TREEBEC_STATUS_NUMERICAL = 6,
  TREEBEC_STATUS_INTERNAL = 7,
} TreebecStatus;

/**
 * Graph families: the plain tree, the tree with a geodesic ray as base,
 * and the tree with an embedded degree-`base_degree` subtree as base.
 */
typedef enum TreebecKind {
  TREEBEC_KIND_TREE = 0,
  TREEBEC_KIND_RAY = 1,
  TREEBEC_KIND_SUBTREE = 2,
} TreebecKind;

/**
 * Opaque finite ball with its perturbation.
 */
typedef struct TreebecModel TreebecModel;

/**
 * Opaque estimate of the norm of the infinite perturbed graph.
 */
typedef struct TreebecNorm TreebecNorm;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *treebec_last_error(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *treebec_version(void);

/**
 * The pair `a(lambda)`, `mu(lambda)` for degree `q`.
 *
 * # Safety
 * `a` and `mu` must be valid for writes.
 */
enum TreebecStatus treebec_a_mu(double lambda, uintptr_t q, double *a, double *mu);

/**
 * Free tree resolvent entry `a(lambda)^d / mu(lambda)`.
 *
 * # Safety
 * `value` must be valid for writes.
 */
enum TreebecStatus treebec_green_entry(uintptr_t q, double lambda, uintptr_t d, double *value);

/**
 * Bose occupation `b(x)` and its regular part `b(x) - 1/x`, for `x >= 0`.
 *
 * # Safety
 * `occupation` and `regular` must be valid for writes.
 */
enum TreebecStatus treebec_bose_split(double x, double *occupation, double *regular);

/**
 * Root of the secular equation on a base truncated at `level` (ray sites or
 * subtree radius).
 *
 * # Safety
 * `root` must be valid for writes.
 */
enum TreebecStatus treebec_secular_root(enum TreebecKind kind,
                                        uintptr_t degree,
                                        uintptr_t base_degree,
                                        uintptr_t level,
                                        double tol,
                                        double *root);

/**
 * Builds the radius-`radius` ball of degree `degree`, perturbed along the base.
 *
 * # Safety
 * `model` must be valid for writes. Release the handle with [`treebec_model_free`].
 */
enum TreebecStatus treebec_model_new(enum TreebecKind kind,
                                     uintptr_t degree,
                                     uintptr_t base_degree,
                                     uintptr_t radius,
                                     struct TreebecModel **model);

/**
 * Releases a model; null is ignored.
 *
 * # Safety
 * `model` must come from [`treebec_model_new`] and not be used afterwards.
 */
void treebec_model_free(struct TreebecModel *model);

/**
 * Number of vertices; 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
uintptr_t treebec_model_vertex_count(const struct TreebecModel *model);

/**
 * Top eigenvalue of the model adjacency.
 *
 * # Safety
 * `model` must be a live handle and `value` valid for writes.
 */
enum TreebecStatus treebec_lambda_max(const struct TreebecModel *model, double tol, double *value);

/**
 * Perron-Frobenius vector normalised to 1 at the root, written to
 * `buffer[0..len]`; `len` must equal the vertex count.
 *
 * # Safety
 * `model` must be a live handle and `buffer` valid for `len` writes.
 */
enum TreebecStatus treebec_pf_vector(const struct TreebecModel *model,
                                     double tol,
                                     double *buffer,
                                     uintptr_t len);

/**
 * Norm of the infinite perturbed graph, extrapolated over the default truncations.
 *
 * # Safety
 * `norm` must be valid for writes. Release the handle with [`treebec_norm_free`].
 */
enum TreebecStatus treebec_norm_estimate(enum TreebecKind kind,
                                         uintptr_t degree,
                                         uintptr_t base_degree,
                                         double tol,
                                         struct TreebecNorm **norm);

/**
 * Releases a norm estimate; null is ignored.
 *
 * # Safety
 * `norm` must come from [`treebec_norm_estimate`] and not be used afterwards.
 */
void treebec_norm_free(struct TreebecNorm *norm);

/**
 * Estimated norm and the gap above the free tree norm.
 *
 * # Safety
 * `norm` must be a live handle; the out-pointers must be valid for writes.
 */
enum TreebecStatus treebec_norm_value(const struct TreebecNorm *norm,
                                      double *lambda_star,
                                      double *gap);

/**
 * Closed-form Perron-Frobenius weight at vertex `x` of `model`.
 *
 * # Safety
 * Both handles must be live and `value` valid for writes.
 */
enum TreebecStatus treebec_closed_v(const struct TreebecNorm *norm,
                                    const struct TreebecModel *model,
                                    uintptr_t x,
                                    double *value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TREEBEC_H */
