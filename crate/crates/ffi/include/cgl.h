#ifndef CGL_H
#define CGL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CglStatus {
  CGL_STATUS_OK = 0,
  CGL_STATUS_NULL_POINTER = 1,
  CGL_STATUS_INVALID_ARGUMENT = 2,
  CGL_STATUS_SIZE_MISMATCH = 3,
  CGL_STATUS_BUFFER_TOO_SMALL = 4,
  CGL_STATUS_NON_FINITE = 5,
  CGL_STATUS_BLOW_UP = 6,
  CGL_STATUS_INTERNAL = 7,
} CglStatus;

/*
 Spectral coefficients of a field on an `M³` grid.
 */
typedef struct CglField CglField;

/*
 Model parameters and time step for the cubic equation.
 */
typedef struct CglSolver CglSolver;

/*
 Schur-test certificate for one shell.
 */
typedef struct CglShellCertificate {
  uint64_t n;
  uint64_t l;
  double rho;
  uint64_t population;
  /*
   `+inf` when the shell has fewer than two points.
   */
  double min_separation;
  double eps_bound;
} CglShellCertificate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the most recent failure on this thread, or null if none.
 The pointer stays valid until the next failing call on the same thread.
 */
const char *cgl_last_error(void);

/*
 Writes the points of `{k : |k|² ∈ [N−L, N+L]}` as `(k1, k2, k3)` triples.

 `out` may be null to query the size only; `*len` always receives the
 number of points. Fails with `BufferTooSmall` if `capacity` points do
 not fit.

 # Safety
 `out` must be null or valid for `3 * capacity` writes; `len` must be valid.
 */
enum CglStatus cgl_enumerate_shell(uint64_t n,
                                   uint64_t l,
                                   int32_t *out,
                                   size_t capacity,
                                   size_t *len);

/*
 Writes every `N ∈ [n_min, n_max]` whose shell has minimum separation
 at least `rho`. Same buffer protocol as [`cgl_enumerate_shell`].

 # Safety
 `out` must be null or valid for `capacity` writes; `len` must be valid.
 */
enum CglStatus cgl_search_separated(uint64_t l,
                                    double rho,
                                    uint64_t n_min,
                                    uint64_t n_max,
                                    uint64_t *out,
                                    size_t capacity,
                                    size_t *len);

/*
 Certifies the multiplier with Fourier data `φ̂(k_j) = re_j + i im_j` on
 the shell `(n, l)`. `ks` holds `count` triples.

 # Safety
 `ks` must be valid for `3 * count` reads, `re` and `im` for `count`
 reads, and `out` for one write.
 */
enum CglStatus cgl_schur_bound(int32_t truncation,
                               const int32_t *ks,
                               const double *re,
                               const double *im,
                               size_t count,
                               uint64_t n,
                               uint64_t l,
                               double rho,
                               struct CglShellCertificate *out);

/*
 Creates the zero field on an `m³` grid (`m` even, at least 4).

 # Safety
 `out` must be valid for one write.
 */
enum CglStatus cgl_field_new(size_t m, struct CglField **out);

/*
 Random smooth initial data, reproducible from `seed`.

 # Safety
 `out` must be valid for one write.
 */
enum CglStatus cgl_field_random(size_t m, uint64_t seed, double amplitude, struct CglField **out);

/*
 # Safety
 `field` must be null or a handle from this library not freed before.
 */
void cgl_field_free(struct CglField *field);

/*
 # Safety
 `field` must be a live handle; `re` and `im` valid for one write each.
 */
enum CglStatus cgl_field_get(const struct CglField *field,
                             int32_t k1,
                             int32_t k2,
                             int32_t k3,
                             double *re,
                             double *im);

/*
 Sets one Fourier coefficient; the mode must lie on the grid.

 # Safety
 `field` must be a live handle.
 */
enum CglStatus cgl_field_set(struct CglField *field,
                             int32_t k1,
                             int32_t k2,
                             int32_t k3,
                             double re,
                             double im);

/*
 Sobolev norm `‖Ψ‖_{H^s}`; `s = 0` gives the physical `L²` norm.

 # Safety
 `field` must be a live handle; `out` valid for one write.
 */
enum CglStatus cgl_field_norm(const struct CglField *field, double s, double *out);

/*
 Solver for `∂tΨ = (1+iω)ΔΨ + (1+iβ)Ψ − (1+iδ)Ψ|Ψ|²` on an `m³` grid.

 # Safety
 `out` must be valid for one write.
 */
enum CglStatus cgl_solver_new(double omega,
                              double beta,
                              double delta,
                              size_t m,
                              double dt,
                              struct CglSolver **out);

/*
 # Safety
 `solver` must be null or a handle from this library not freed before.
 */
void cgl_solver_free(struct CglSolver *solver);

/*
 Advances `field` in place by `horizon`. On blow-up the field holds the
 last finite state and `BlowUp` is returned.

 # Safety
 `solver` and `field` must be live handles.
 */
enum CglStatus cgl_solver_evolve(const struct CglSolver *solver,
                                 struct CglField *field,
                                 double horizon);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CGL_H */
