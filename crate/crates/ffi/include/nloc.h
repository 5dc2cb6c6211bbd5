#ifndef NLOC_H
#define NLOC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NlocStatus {
  NLOC_STATUS_OK = 0,
  NLOC_STATUS_NULL_POINTER = 1,
  NLOC_STATUS_INVALID_ARGUMENT = 2,
  NLOC_STATUS_RANGE = 3,
  NLOC_STATUS_STATE = 4,
  NLOC_STATUS_SHAPE = 5,
  NLOC_STATUS_SIZE = 6,
  NLOC_STATUS_PARAM = 7,
  NLOC_STATUS_NOT_HOPF = 8,
  NLOC_STATUS_RESONANCE = 9,
  NLOC_STATUS_SINGULAR_OPERATOR = 10,
  NLOC_STATUS_MAX_ITERATIONS = 11,
  NLOC_STATUS_DIVERGENCE = 12,
  NLOC_STATUS_CONFIG = 13,
  NLOC_STATUS_FORMAT = 14,
  NLOC_STATUS_IO = 15,
  NLOC_STATUS_BUFFER_TOO_SMALL = 16,
  NLOC_STATUS_PANIC = 17,
} NlocStatus;

// Opaque discrete Hankel transform plan.
typedef struct NlocHankelPlan NlocHankelPlan;

// Opaque kernel symbol.
typedef struct NlocKernel NlocKernel;

// Opaque time stepper.
typedef struct NlocSimulator NlocSimulator;

// Hopf data and reduced-equation coefficients; complex numbers are `[re, im]`.
typedef struct NlocNormalForm {
  double omega;
  double c_star;
  double w1[2][2];
  double w1_star[2][2];
  double v1[2][2];
  double v0[2][2];
  double vm1[2][2];
  double nu1[2];
  double kappa[2];
  double a1[2];
  double a2[2];
} NlocNormalForm;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `len`) and returns the full message length without the NUL.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t nloc_last_error_message(char *buf, size_t len);

// Validated rational symbol `−Dρ²/(1 + dρ²)`.
//
// # Safety
// `out` must be a valid pointer; on success it receives a handle to free with
// [`nloc_kernel_free`].
enum NlocStatus nloc_kernel_rational(double diffusion, double range, struct NlocKernel **out);

// # Safety
// `kernel` must come from this library and `value` must be valid.
enum NlocStatus nloc_kernel_eval(const struct NlocKernel *kernel, double rho, double *value);

// Leading coefficient `α` of `K̂(ρ) ≈ −αρ²`.
//
// # Safety
// `kernel` must come from this library and `alpha` must be valid.
enum NlocStatus nloc_kernel_alpha(const struct NlocKernel *kernel, double *alpha);

// # Safety
// `kernel` must be null or a handle not yet freed.
void nloc_kernel_free(struct NlocKernel *kernel);

// # Safety
// `out` must be valid; free the handle with [`nloc_hankel_free`].
enum NlocStatus nloc_hankel_new(int32_t order,
                                double rmax,
                                size_t nodes,
                                struct NlocHankelPlan **out);

// # Safety
// `plan` must come from this library.
enum NlocStatus nloc_hankel_len(const struct NlocHankelPlan *plan, size_t *len);

// Radial nodes (`which = 0`) or frequencies (`which = 1`) into `buf`.
//
// # Safety
// `buf` must hold `len` doubles.
enum NlocStatus nloc_hankel_grid(const struct NlocHankelPlan *plan,
                                 int32_t which,
                                 double *buf,
                                 size_t len);

// Forward transform of nodal values into frequency values.
//
// # Safety
// All buffers must hold `len` doubles, `len` equal to the plan length.
enum NlocStatus nloc_hankel_forward(const struct NlocHankelPlan *plan,
                                    const double *re,
                                    const double *im,
                                    double *re_out,
                                    double *im_out,
                                    size_t len);

// Inverse transform of frequency values into nodal values.
//
// # Safety
// All buffers must hold `len` doubles, `len` equal to the plan length.
enum NlocStatus nloc_hankel_inverse(const struct NlocHankelPlan *plan,
                                    const double *re,
                                    const double *im,
                                    double *re_out,
                                    double *im_out,
                                    size_t len);

// # Safety
// `plan` must be null or a handle not yet freed.
void nloc_hankel_free(struct NlocHankelPlan *plan);

// Normal form of the nonlocal FitzHugh–Nagumo system at angular mode `n0`.
//
// # Safety
// `out` must be valid.
enum NlocStatus nloc_fhn_normal_form(double tau,
                                     double beta,
                                     double delta,
                                     int32_t n0,
                                     struct NlocNormalForm *out);

// Simulator from a NUL-terminated TOML document holding the run table
// (the body of `[simulate]`); relative paths resolve against the working
// directory.
//
// # Safety
// `config` must be a valid C string and `out` valid; free the handle with
// [`nloc_simulator_free`].
enum NlocStatus nloc_simulator_new(const char *config, struct NlocSimulator **out);

// Advances by `steps` time steps.
//
// # Safety
// `sim` must come from this library.
enum NlocStatus nloc_simulator_step(struct NlocSimulator *sim, size_t steps);

// # Safety
// `sim` and `t` must be valid.
enum NlocStatus nloc_simulator_time(const struct NlocSimulator *sim, double *t);

// Grid points per side.
//
// # Safety
// `sim` and `n` must be valid.
enum NlocStatus nloc_simulator_grid_size(const struct NlocSimulator *sim, size_t *n);

// Copies `u` and `v` (row-major, `n²` values each) into the buffers.
//
// # Safety
// `u` and `v` must each hold `len` doubles.
enum NlocStatus nloc_simulator_state(struct NlocSimulator *sim, double *u, double *v, size_t len);

// # Safety
// `sim` must be null or a handle not yet freed.
void nloc_simulator_free(struct NlocSimulator *sim);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NLOC_H */
