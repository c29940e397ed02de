#ifndef FHARM_H
#define FHARM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Domain kinds accepted by [`fharm_mesh_new`].
 */
typedef enum {
  /**
   * a = raw outer radius, b = normalized outer radius (ratio R > 1).
   */
  FHARM_DOMAIN_KIND_DISK = 0,
  /**
   * a = half-side; b unused.
   */
  FHARM_DOMAIN_KIND_SQUARE = 1,
  /**
   * a = side of the base triangle, b = prefractal level (0..=5).
   */
  FHARM_DOMAIN_KIND_KOCH = 2,
} FharmDomainKind;

/**
 * Result of every fallible call.
 */
typedef enum {
  FHARM_STATUS_OK = 0,
  FHARM_STATUS_INVALID_INPUT = 1,
  FHARM_STATUS_CONFIG = 2,
  FHARM_STATUS_NUMERICAL = 3,
  FHARM_STATUS_CONSISTENCY = 4,
  FHARM_STATUS_NULL_POINTER = 5,
  FHARM_STATUS_BUFFER_TOO_SMALL = 6,
  FHARM_STATUS_PANIC = 7,
} FharmStatus;

/**
 * Opaque P1 field on a mesh.
 */
typedef struct FharmField FharmField;

/**
 * Opaque integrand f.
 */
typedef struct FharmIntegrand FharmIntegrand;

/**
 * Opaque boundary measure.
 */
typedef struct FharmMeasure FharmMeasure;

/**
 * Opaque triangulated ring domain.
 */
typedef struct FharmMesh FharmMesh;

/**
 * Solver settings; [`fharm_solve_options_default`] fills the defaults.
 */
typedef struct {
  size_t max_newton;
  double residual_tol;
  double stage_tol;
  double linear_tol;
} FharmSolveOptions;

/**
 * One boundary arc.
 */
typedef struct {
  double x;
  double y;
  double length;
  double weight;
} FharmArc;

/**
 * Dimension estimates over the radius grid `radii[0..n]` (null with n = 0
 * selects the default grid) and `centers` μ-distributed centers.
 */
typedef struct {
  double local_dimension;
  double local_ci_low;
  double local_ci_high;
  double information_dimension;
  double information_ci_low;
  double information_ci_high;
  double boundary_box_dimension;
} FharmDimension;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *fharm_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *fharm_version(void);

/**
 * f(η) = |η|^p.
 *
 * # Safety
 * `out_handle` must be a valid pointer to writable storage for a handle.
 */
FharmStatus fharm_integrand_power(double p, FharmIntegrand **out_handle);

/**
 * f(η) = ηᵀAη with A = [[a11, a12], [a21, a22]] symmetric positive definite.
 *
 * # Safety
 * As [`fharm_integrand_power`].
 */
FharmStatus fharm_integrand_quadratic(double a11,
                                      double a12,
                                      double a21,
                                      double a22,
                                      FharmIntegrand **out_handle);

/**
 * |η|^p times the periodic cubic spline through `n` uniform samples of the
 * angular profile on [0, 2π).
 *
 * # Safety
 * `samples` must point to `n` readable doubles; `out_handle` as above.
 */
FharmStatus fharm_integrand_sampled(double p,
                                    const double *samples,
                                    size_t n,
                                    FharmIntegrand **out_handle);

/**
 * # Safety
 * `h` must be null or a handle from this library not yet freed.
 */
void fharm_integrand_free(FharmIntegrand *h);

/**
 * Degree p of the integrand.
 *
 * # Safety
 * `h` must be a live integrand handle; `out_p` writable.
 */
FharmStatus fharm_integrand_degree(const FharmIntegrand *h, double *out_p);

/**
 * f(x, y).
 *
 * # Safety
 * `h` must be a live integrand handle; `out_value` writable.
 */
FharmStatus fharm_integrand_eval(const FharmIntegrand *h, double x, double y, double *out_value);

/**
 * ∇f(x, y) into `out_grad[0..2]`.
 *
 * # Safety
 * `out_grad` must point to 2 writable doubles.
 */
FharmStatus fharm_integrand_grad(const FharmIntegrand *h, double x, double y, double *out_grad);

/**
 * D²f(x, y) row-major into `out_hess[0..4]`.
 *
 * # Safety
 * `out_hess` must point to 4 writable doubles.
 */
FharmStatus fharm_integrand_hessian(const FharmIntegrand *h, double x, double y, double *out_hess);

/**
 * Builds the normalized domain and meshes it with maximum edge `h_max`
 * and outer-boundary spacing `grading·h_max`.
 *
 * # Safety
 * `out_handle` must be writable.
 */
FharmStatus fharm_mesh_new(FharmDomainKind kind,
                           double a,
                           double b,
                           double h_max,
                           double grading,
                           FharmMesh **out_handle);

/**
 * # Safety
 * `h` must be null or a live mesh handle.
 */
void fharm_mesh_free(FharmMesh *h);

/**
 * # Safety
 * `h` must be a live mesh handle; outputs writable.
 */
FharmStatus fharm_mesh_size(const FharmMesh *h, size_t *out_vertices, size_t *out_triangles);

/**
 * Copies vertex coordinates as x0, y0, x1, y1, … into `buf` of `len`
 * doubles; needs `len ≥ 2·vertices`.
 *
 * # Safety
 * `buf` must point to `len` writable doubles.
 */
FharmStatus fharm_mesh_vertices(const FharmMesh *h, double *buf, size_t len);

FharmSolveOptions fharm_solve_options_default(void);

/**
 * Capacitary function of the ring: u = 0 on the outer boundary, 1 on the
 * unit circle. `opts` may be null for defaults.
 *
 * # Safety
 * `mesh` and `integrand` must be live handles; `opts` null or readable;
 * `out_handle` writable.
 */
FharmStatus fharm_solve(const FharmMesh *mesh,
                        const FharmIntegrand *integrand,
                        const FharmSolveOptions *opts,
                        FharmField **out_handle);

/**
 * # Safety
 * `h` must be null or a live field handle.
 */
void fharm_field_free(FharmField *h);

/**
 * Copies the nodal values (one per mesh vertex) into `buf`.
 *
 * # Safety
 * `buf` must point to `len` writable doubles.
 */
FharmStatus fharm_field_values(const FharmField *h, double *buf, size_t len);

/**
 * Linear interpolation of the field at (x, y); InvalidInput outside the mesh.
 *
 * # Safety
 * `h` must be a live field handle; `out_value` writable.
 */
FharmStatus fharm_field_eval(const FharmField *h, double x, double y, double *out_value);

/**
 * Boundary measure of a solved field.
 *
 * # Safety
 * `field`, `integrand` live handles; `out_handle` writable.
 */
FharmStatus fharm_measure_extract(const FharmField *field,
                                  const FharmIntegrand *integrand,
                                  FharmMeasure **out_handle);

/**
 * # Safety
 * `h` must be null or a live measure handle.
 */
void fharm_measure_free(FharmMeasure *h);

/**
 * Number of arcs and total mass.
 *
 * # Safety
 * `h` live; outputs writable.
 */
FharmStatus fharm_measure_summary(const FharmMeasure *h, size_t *out_arcs, double *out_total_mass);

/**
 * Copies the arcs into `buf` of capacity `len`.
 *
 * # Safety
 * `buf` must point to `len` writable `FharmArc`.
 */
FharmStatus fharm_measure_arcs(const FharmMeasure *h, FharmArc *buf, size_t len);

/**
 * μ(B((x, y), r)).
 *
 * # Safety
 * `h` live; `out_mass` writable.
 */
FharmStatus fharm_measure_ball(const FharmMeasure *h,
                               double x,
                               double y,
                               double r,
                               double *out_mass);

/**
 * I₀(t) = ∫_{u=t} f(∇u)/|∇u| dH¹.
 *
 * # Safety
 * Handles live; `out_flux` writable.
 */
FharmStatus fharm_level_flux(const FharmField *field,
                             const FharmIntegrand *integrand,
                             double t,
                             double *out_flux);

/**
 * Winding numbers of u_z around each component of {u = t}. Writes at most
 * `cap` values into `buf` and the component count into `out_count`;
 * BufferTooSmall if `cap` is short (the count is still written).
 *
 * # Safety
 * `buf` must point to `cap` writable int64 values; `out_count` writable.
 */
FharmStatus fharm_winding_numbers(const FharmField *field,
                                  double t,
                                  int64_t *buf,
                                  size_t cap,
                                  size_t *out_count);

/**
 * λ(r) = r·exp(sign·A·𝔇(r)); `sign` is +1 or −1.
 *
 * # Safety
 * `out_value` writable.
 */
FharmStatus fharm_gauge_value(double a, int32_t sign, double c_star, double r, double *out_value);

/**
 * # Safety
 * `h` live; `radii` readable for `n` doubles; `out_dim` writable.
 */
FharmStatus fharm_dimension(const FharmMeasure *h,
                            const double *radii,
                            size_t n,
                            size_t centers,
                            FharmDimension *out_dim);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FHARM_H */
