#ifndef KVWAVE_H
#define KVWAVE_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum KvColumn {
  KV_COLUMN_TIME = 0,
  KV_COLUMN_ENERGY_WEAK = 1,
  KV_COLUMN_ENERGY_REGULAR = 2,
  KV_COLUMN_CHI = 3,
  KV_COLUMN_GRAD2_UT_MU2 = 4,
} KvColumn;

typedef enum KvMethod {
  KV_METHOD_DIRECT_RK4 = 0,
  KV_METHOD_IMPLICIT_EULER = 1,
  KV_METHOD_YOSIDA_RK4 = 2,
} KvMethod;

typedef enum KvModel {
  KV_MODEL_KELVIN_VOIGT = 0,
  KV_MODEL_BT_PROTOTYPE = 1,
} KvModel;

typedef enum KvStatus {
  KV_STATUS_OK = 0,
  KV_STATUS_NULL_POINTER = 1,
  KV_STATUS_INVALID_ARGUMENT = 2,
  KV_STATUS_NOT_CONVERGED = 3,
  KV_STATUS_BLOW_UP = 4,
  KV_STATUS_DOMAIN_MISMATCH = 5,
  KV_STATUS_INSUFFICIENT_HORIZON = 6,
  KV_STATUS_BUFFER_TOO_SMALL = 7,
  KV_STATUS_IO = 8,
  KV_STATUS_PANIC = 9,
} KvStatus;

/**
 * Opaque spectral domain.
 */
typedef struct KvDomain KvDomain;

/**
 * Opaque energy trace.
 */
typedef struct KvTrace KvTrace;

/**
 * Integrator settings; `alpha` is read only by `YosidaRk4`, and
 * `resolvent_tol <= 0` selects the default.
 */
typedef struct KvIntegrator {
  enum KvMethod method;
  double alpha;
  double dt;
  double t_end;
  size_t sample_stride;
  double resolvent_tol;
} KvIntegrator;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next `kv_*` call on the same thread.
 */
const char *kv_last_error_message(void);

/**
 * Interval `(0, length)` with `modes` modes.
 */
enum KvStatus kv_domain_interval(double length, size_t modes, struct KvDomain **out);

/**
 * Rectangle `(0, lx) × (0, ly)` with `modes_per_axis²` modes.
 */
enum KvStatus kv_domain_rectangle(double lx,
                                  double ly,
                                  size_t modes_per_axis,
                                  struct KvDomain **out);

void kv_domain_free(struct KvDomain *domain);

/**
 * Number of modes, 0 for a null handle.
 */
size_t kv_domain_len(const struct KvDomain *domain);

enum KvStatus kv_domain_eigenvalues(const struct KvDomain *domain,
                                    double *buf,
                                    size_t cap,
                                    size_t *out_len);

enum KvStatus kv_domain_poincare_constant(const struct KvDomain *domain, double *out);

/**
 * Solves `(I - αA)(u, v) = (f, g)`. `f`, `g`, `u_out`, `v_out` hold
 * `kv_domain_len` values; `chi_out` may be null.
 */
enum KvStatus kv_solve_resolvent(const struct KvDomain *domain,
                                 double alpha,
                                 const double *f,
                                 const double *g,
                                 double tol,
                                 double *u_out,
                                 double *v_out,
                                 double *chi_out);

/**
 * Evolves modal data `(a, b)` (each `kv_domain_len` values) and returns the
 * sampled energy trace.
 */
enum KvStatus kv_evolve(const struct KvDomain *domain,
                        enum KvModel model,
                        const struct KvIntegrator *integrator,
                        const double *a,
                        const double *b,
                        struct KvTrace **out);

void kv_trace_free(struct KvTrace *trace);

/**
 * Number of samples, 0 for a null handle.
 */
size_t kv_trace_len(const struct KvTrace *trace);

/**
 * Copies one trace column. With `cap` too small the required length is
 * still written to `out_len` and `KV_STATUS_BUFFER_TOO_SMALL` is returned.
 */
enum KvStatus kv_trace_column(const struct KvTrace *trace,
                              enum KvColumn column,
                              double *buf,
                              size_t cap,
                              size_t *out_len);

/**
 * Decay constant `C(λ₁, E₀)` of a Kelvin-Voigt trace.
 */
enum KvStatus kv_trace_decay_constant(const struct KvTrace *trace, double *out);

enum KvStatus kv_decay_constant(double lambda1, double e0, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KVWAVE_H */
