#ifndef LPQ_SAMPLING_H
#define LPQ_SAMPLING_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum {
  LPQ_STATUS_OK = 0,
  LPQ_STATUS_NULL_POINTER = 1,
  LPQ_STATUS_INVALID_ARGUMENT = 2,
  LPQ_STATUS_VALIDATION = 3,
  LPQ_STATUS_NON_CONTRACTION = 4,
  LPQ_STATUS_IO = 5,
  LPQ_STATUS_PANIC = 6,
  LPQ_STATUS_INTERNAL = 7,
} LpqStatus;

/**
 * Normalized generator on a separated lattice.
 */
typedef struct LpqKernel LpqKernel;

/**
 * Output of [`lpq_reconstruct`].
 */
typedef struct LpqReconstruction LpqReconstruction;

/**
 * `l * m` sample points stored as `j * l + i`.
 */
typedef struct LpqSampleSet LpqSampleSet;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next call into the library from the same thread.
 */
const char *lpq_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *lpq_version(void);

/**
 * `||c||_{l^{p,q}}` of an `l x m` matrix stored as `j * l + i`. Pass
 * `INFINITY` for a supremum.
 */
LpqStatus lpq_seq_mixed_norm(const double *values,
                             size_t l,
                             size_t m,
                             double p,
                             double q,
                             double *out);

/**
 * Normalized generator on `(2/3) Z^{n+1}` with every support inside
 * `C_{r,s}`.
 */
LpqStatus lpq_kernel_new(double r, double s, size_t n, LpqKernel **out);

void lpq_kernel_free(LpqKernel *kernel);

/**
 * Number of lattice nodes, 0 for a null kernel.
 */
size_t lpq_kernel_node_count(const LpqKernel *kernel);

/**
 * `K(p, q)` for two points of `n + 1` coordinates.
 */
LpqStatus lpq_kernel_eval(const LpqKernel *kernel, const double *p, const double *q, double *out);

/**
 * Contraction factor `||K||_W (||w_theta(K)||_W + delta)` at grid spacing
 * `1 / resolution`.
 */
LpqStatus lpq_contraction_factor(const LpqKernel *kernel,
                                 double theta,
                                 double delta,
                                 size_t resolution,
                                 double *out);

/**
 * `(1 + gamma)/(1 - gamma) gamma^{r+1} f_norm`; `gamma` must lie in `[0, 1)`.
 */
LpqStatus lpq_error_certificate(double gamma, double f_norm, uint32_t r, double *out);

/**
 * `l * m` points drawn uniformly from the kernel's cube with `seed`.
 */
LpqStatus lpq_samples_draw(const LpqKernel *kernel,
                           size_t l,
                           size_t m,
                           uint64_t seed,
                           LpqSampleSet **out);

/**
 * Cell centers of a product grid over the kernel's cube; `l` must be a
 * perfect `n`-th power.
 */
LpqStatus lpq_samples_regular(const LpqKernel *kernel, size_t l, size_t m, LpqSampleSet **out);

void lpq_samples_free(LpqSampleSet *samples);

/**
 * Number of points, 0 for a null set.
 */
size_t lpq_samples_len(const LpqSampleSet *samples);

/**
 * Copies the coordinates (`len * (n + 1)` values) into `buf` of capacity `cap`.
 */
LpqStatus lpq_samples_points(const LpqSampleSet *samples, double *buf, size_t cap);

/**
 * Iterative reconstruction from `values` (one per sample, same order) with
 * partition radius `theta` on a grid of spacing `1 / resolution`.
 */
LpqStatus lpq_reconstruct(const LpqKernel *kernel,
                          const LpqSampleSet *samples,
                          const double *values,
                          size_t len,
                          double theta,
                          size_t resolution,
                          double p,
                          double q,
                          double tol,
                          uint32_t r_max,
                          LpqReconstruction **out);

void lpq_reconstruction_free(LpqReconstruction *rec);

/**
 * Iterations after `f_0`, 0 for a null handle.
 */
size_t lpq_reconstruction_iterations(const LpqReconstruction *rec);

/**
 * 1 when the residual criterion was met, 0 otherwise.
 */
int32_t lpq_reconstruction_converged(const LpqReconstruction *rec);

/**
 * Copies the lattice coefficients (one per node) into `buf` of capacity `cap`.
 */
LpqStatus lpq_reconstruction_coefficients(const LpqReconstruction *rec, double *buf, size_t cap);

/**
 * Runs a CLI subcommand (`"bounds"`, `"sample-sweep"`, `"reconstruct"` or
 * `"kernel-check"`) from a TOML config into `out_dir`.
 */
LpqStatus lpq_run_experiment(const char *command, const char *config_path, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LPQ_SAMPLING_H */
