/* C interface of the pcuq polynomial chaos toolkit. Handles are opaque; every fallible call returns a PCUQ_* status code and leaves a message for pcuq_last_error_message. */

#ifndef PCUQ_H
#define PCUQ_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Success.
#define PCUQ_OK 0

// A pointer argument was null.
#define PCUQ_ERR_NULL 1

// An argument failed validation (dimensions, ranges, family codes).
#define PCUQ_ERR_INVALID 2

// A numeric precondition failed (non-finite data, zero variance, ...).
#define PCUQ_ERR_NUMERIC 3

// File or serialization failure.
#define PCUQ_ERR_IO 4

// Invalid UTF-8 in a string argument.
#define PCUQ_ERR_UTF8 5

// The library panicked; state is unchanged but the call did nothing.
#define PCUQ_ERR_PANIC 6

// Hermite family code (standard normal germ).
#define PCUQ_FAMILY_HERMITE 0

// Legendre family code (uniform germ on [-1, 1]).
#define PCUQ_FAMILY_LEGENDRE 1

// Opaque multivariate polynomial basis.
typedef struct PcuqBasis PcuqBasis;

// Opaque tensor quadrature rule.
typedef struct PcuqRule PcuqRule;

// Opaque PC surrogate.
typedef struct PcuqSurrogate PcuqSurrogate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copy the last error message (nul-terminated) into `buffer`; returns the
// full message length in bytes excluding the nul, regardless of truncation.
// A zero-length buffer (or null) just queries the length.
uintptr_t pcuq_last_error_message(char *buffer, uintptr_t capacity);

// Build a total-degree basis of `order` over `dim` germ dimensions with the
// given family codes.
//
// # Safety
// `families` must point to `dim` readable i32 values; `out` must be a valid
// destination for one pointer.
int32_t pcuq_basis_new(uintptr_t dim,
                       uintptr_t order,
                       const int32_t *families,
                       struct PcuqBasis **out);

// Release a basis handle. Null is a no-op.
//
// # Safety
// `basis` must be null or a pointer obtained from `pcuq_basis_new`, not yet
// freed.
void pcuq_basis_free(struct PcuqBasis *basis);

// Number of terms (P + 1) of the basis.
//
// # Safety
// `basis` must be a live handle; `out` must be writable.
int32_t pcuq_basis_term_count(const struct PcuqBasis *basis, uintptr_t *out);

// Build a full-tensor Gauss rule with `points_per_dim[i]` nodes in
// dimension i.
//
// # Safety
// `families` and `points_per_dim` must point to `dim` readable values;
// `out` must be writable.
int32_t pcuq_rule_tensor(const int32_t *families,
                         const uintptr_t *points_per_dim,
                         uintptr_t dim,
                         struct PcuqRule **out);

// Release a rule handle. Null is a no-op.
//
// # Safety
// `rule` must be null or a live handle from `pcuq_rule_tensor`.
void pcuq_rule_free(struct PcuqRule *rule);

// Total node count of the rule.
//
// # Safety
// `rule` must be a live handle; `out` must be writable.
int32_t pcuq_rule_node_count(const struct PcuqRule *rule, uintptr_t *out);

// Copy node coordinates (row-major node_count x dim) and weights into the
// caller's buffers. Either pointer may be null to skip that copy.
//
// # Safety
// Non-null `nodes` must hold node_count*dim doubles; non-null `weights`
// must hold node_count doubles.
int32_t pcuq_rule_copy(const struct PcuqRule *rule, double *nodes, double *weights);

// Project model outputs evaluated at the rule's nodes (row-major
// node_count x n_outputs) onto the basis. `log_transform` nonzero projects
// ln(y) and evaluates as exp of the expansion.
//
// # Safety
// `outputs` must hold node_count*n_outputs doubles; handles must be live;
// `out` must be writable.
int32_t pcuq_project(const struct PcuqRule *rule,
                     const struct PcuqBasis *basis,
                     const double *outputs,
                     uintptr_t n_outputs,
                     int32_t log_transform,
                     struct PcuqSurrogate **out);

// Release a surrogate handle. Null is a no-op.
//
// # Safety
// `surrogate` must be null or a live handle.
void pcuq_surrogate_free(struct PcuqSurrogate *surrogate);

// Number of output columns of the surrogate.
//
// # Safety
// `surrogate` must be a live handle; `out` must be writable.
int32_t pcuq_surrogate_n_outputs(const struct PcuqSurrogate *surrogate, uintptr_t *out);

// Evaluate all outputs at a canonical point of length `dim`.
//
// # Safety
// `point` must hold `dim` doubles; `out` must hold n_outputs doubles.
int32_t pcuq_surrogate_eval(const struct PcuqSurrogate *surrogate,
                            const double *point,
                            uintptr_t dim,
                            double *out);

// Coefficient-based mean and variance per output. Fails with
// `PCUQ_ERR_NUMERIC` on log-transformed surrogates.
//
// # Safety
// `mean` and `variance` must each hold n_outputs doubles.
int32_t pcuq_surrogate_moments(const struct PcuqSurrogate *surrogate,
                               double *mean,
                               double *variance);

// First-order, total, and mixed sensitivity indices of one output column.
// `first` and `total` receive `dim` values; `mixed` receives one. Any of
// the three may be null to skip it. Fails with `PCUQ_ERR_NUMERIC` when the
// output has zero variance.
//
// # Safety
// Non-null buffers must have the documented lengths.
int32_t pcuq_surrogate_sobol(const struct PcuqSurrogate *surrogate,
                             uintptr_t output,
                             double *first,
                             double *total,
                             double *mixed);

// Exceedance probability P(output > threshold) and its standard error per
// output column, from `n` seeded canonical draws.
//
// # Safety
// `probability` and `stderr_out` must each hold n_outputs doubles (either
// may be null to skip).
int32_t pcuq_surrogate_exceedance(const struct PcuqSurrogate *surrogate,
                                  double threshold,
                                  uintptr_t n,
                                  uint64_t seed,
                                  double *probability,
                                  double *stderr_out);

// Save the surrogate as an expansion archive (JSON) at `path`.
//
// # Safety
// `path` must be a nul-terminated string.
int32_t pcuq_surrogate_save(const struct PcuqSurrogate *surrogate, const char *path);

// Load an expansion archive written by `pcuq_surrogate_save` (or the CLI).
//
// # Safety
// `path` must be a nul-terminated string; `out` must be writable.
int32_t pcuq_surrogate_load(const char *path, struct PcuqSurrogate **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PCUQ_H */
