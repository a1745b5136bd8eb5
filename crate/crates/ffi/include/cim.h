#ifndef CIM_H
#define CIM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  CIM_STATUS_OK = 0,
  CIM_STATUS_NULL_POINTER = 1,
  CIM_STATUS_DOMAIN = 2,
  CIM_STATUS_RANGE = 3,
  CIM_STATUS_DIMENSION = 4,
  CIM_STATUS_BLOW_UP = 5,
  CIM_STATUS_EMPTY_CLOUD = 6,
  CIM_STATUS_CONFIG = 7,
  CIM_STATUS_PIPELINE = 8,
  CIM_STATUS_IO = 9,
  CIM_STATUS_PANIC = 10,
} CimStatus;

/**
 * Opaque cloud of `(u, u_t)` states.
 */
typedef struct CimCloud CimCloud;

/**
 * Opaque coefficient vector in the sine basis.
 */
typedef struct CimField CimField;

typedef struct {
  double ell;
  size_t n_star_parabolic;
  /**
   * Zero when no dimension up to `n_max` qualifies.
   */
  size_t n_star_hyperbolic;
  double eps_s;
  bool eps_s_found;
} CimCertificate;

typedef struct {
  double d_uv;
  double d_vu;
  double dist;
} CimHausdorff;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message, NUL-terminated and
 * truncated to `cap` bytes. Returns the full message length without the NUL.
 *
 * # Safety
 * `buf` must be null or point to `cap` writable bytes.
 */
size_t cim_last_error(char *buf, size_t cap);

/**
 * # Safety
 * Out-pointers must be valid for writes.
 */
CimStatus cim_lipschitz_constant(double delta, double *out_ell);

/**
 * # Safety
 * Out-pointers must be valid for writes.
 */
CimStatus cim_parabolic_min_dim(double delta, size_t *out_n);

/**
 * # Safety
 * Out-pointers must be valid for writes.
 */
CimStatus cim_certify(double delta, double eps, size_t n_max, CimCertificate *out_cert);

/**
 * New field from `n` coefficients.
 *
 * # Safety
 * `coeffs` must point to `n` readable doubles; out-pointers must be valid for writes.
 */
CimStatus cim_field_new(const double *coeffs, size_t n, CimField **out_field);

/**
 * # Safety
 * `field` must come from this library and not be used afterwards.
 */
void cim_field_free(CimField *field);

/**
 * Number of modes, or zero for a null handle.
 *
 * # Safety
 * `field` must be null or a live handle.
 */
size_t cim_field_len(const CimField *field);

/**
 * Copies up to `cap` coefficients into `buf`.
 *
 * # Safety
 * `field` must be a live handle; `buf` must hold `cap` doubles.
 */
CimStatus cim_field_coeffs(const CimField *field, double *buf, size_t cap);

/**
 * `‖u‖_s = (Σ λ_n^s u_n²)^{1/2}`.
 *
 * # Safety
 * `field` must be a live handle; out-pointers must be valid for writes.
 */
CimStatus cim_norm_hs(const CimField *field, double s, double *out_norm);

/**
 * `‖(u, v)‖_{X^ε_k}`.
 *
 * # Safety
 * `u` and `v` must be live handles; out-pointers must be valid for writes.
 */
CimStatus cim_norm_xeps(const CimField *u,
                        const CimField *v,
                        uint32_t k,
                        double eps,
                        double *out_norm);

/**
 * Galerkin projection of `u³`.
 *
 * # Safety
 * `u` must be a live handle; out-pointers must be valid for writes.
 */
CimStatus cim_cubic(const CimField *u, CimField **out_field);

/**
 * Parabolic flow from `u0` to `t_end`. `f` may be null for zero forcing.
 *
 * # Safety
 * `u0` must be a live handle, `f` null or live; out-pointers must be valid for writes.
 */
CimStatus cim_parabolic_evolve(const CimField *u0,
                               const CimField *f,
                               double t_end,
                               double dt,
                               CimField **out_field);

/**
 * Hyperbolic flow from `(u0, v0)` to `t_end`. `f` may be null.
 *
 * # Safety
 * `u0`, `v0` must be live handles, `f` null or live; both outputs must be
 * valid for writes.
 */
CimStatus cim_hyperbolic_evolve(const CimField *u0,
                                const CimField *v0,
                                const CimField *f,
                                double eps,
                                double t_end,
                                double dt,
                                CimField **out_u,
                                CimField **out_v);

/**
 * Empty cloud of states with `n_modes` modes.
 *
 * # Safety
 * Out-pointers must be valid for writes.
 */
CimStatus cim_cloud_new(size_t n_modes, CimCloud **out_cloud);

/**
 * Appends `(u, v)`, each `n_modes` long. `v` may be null for a zero velocity.
 *
 * # Safety
 * `cloud` must be a live handle; `u` (and `v` if non-null) must hold
 * `n_modes` doubles.
 */
CimStatus cim_cloud_push(CimCloud *cloud, const double *u, const double *v);

/**
 * Number of points, or zero for a null handle.
 *
 * # Safety
 * `cloud` must be null or a live handle.
 */
size_t cim_cloud_len(const CimCloud *cloud);

/**
 * # Safety
 * `cloud` must come from this library and not be used afterwards.
 */
void cim_cloud_free(CimCloud *cloud);

/**
 * Hausdorff distance in `X^ε_k` between two clouds.
 *
 * # Safety
 * `a`, `b` must be live handles; out-pointers must be valid for writes.
 */
CimStatus cim_symdist(const CimCloud *a,
                      const CimCloud *b,
                      uint32_t k,
                      double eps,
                      CimHausdorff *out_report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CIM_H */
